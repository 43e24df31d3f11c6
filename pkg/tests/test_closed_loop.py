import numpy as np
import pytest

from afclab.closed_loop import (
    PythonRlsController,
    RlsController,
    Safeguards,
    SimulationError,
    simulate,
)
from afclab.forward_paths import calibrate_gain, make_delay, make_iir_allpass
from afclab.signals import RationalFilter, ar_generate, fir_filter, iir_filter, white_noise

OFF = Safeguards.disabled()


def impulse(n):
    x = np.zeros(n)
    x[0] = 1.0
    return x


def random_scenario(seed, n=3000):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(12) * np.exp(-np.arange(12) / 4)
    g0 = make_iir_allpass(int(rng.integers(2, 12)), 1, seed)
    g = g0.scaled(calibrate_gain(g0, f))
    s = ar_generate([1.0, -0.8, 0.2], rng.standard_normal(n))
    return f, g, s


def test_zero_paths_pass_source_through(rng):
    s = rng.standard_normal(50)
    sim = simulate(np.zeros(3), RationalFilter([0.0, 0.0]), s, safeguards=OFF)
    assert np.array_equal(sim.m, s) and np.array_equal(sim.l, np.zeros(50))


def test_hand_recursion():
    sim = simulate([0.4], make_delay(1).scaled(0.5), impulse(6), safeguards=OFF)
    assert np.allclose(sim.m, [1.0, 0.2, 0.04, 0.008, 0.0016, 0.00032], atol=1e-15)
    assert np.allclose(sim.l, [0.0, 0.5, 0.1, 0.02, 0.004, 0.0008], atol=1e-15)


def test_loudspeaker_clipping_is_exact_saturation():
    s = impulse(5) * 3.0
    sim = simulate([0.0], make_delay(1), s)
    assert sim.l[1] == 1.0
    sim = simulate([0.0], make_delay(1), -s)
    assert sim.l[1] == -1.0
    assert sim.trace.amp_clips == 1 and "amp_clipped" in sim.trace.flags


def test_forward_path_needs_delay():
    with pytest.raises(ValueError, match="delay"):
        simulate([0.1], RationalFilter([1.0]), np.ones(4))


def test_causality():
    f, g, s = random_scenario(1, 400)
    base = simulate(f, g, s, safeguards=OFF)
    s2 = s.copy()
    s2[200] += 5.0
    pert = simulate(f, g, s2, safeguards=OFF)
    assert np.array_equal(base.m[:200], pert.m[:200])
    assert np.array_equal(base.l[:201], pert.l[:201])
    assert base.m[200] != pert.m[200]


@pytest.mark.parametrize("seed", range(4))
def test_open_loop_equivalence(seed):
    _, g, s = random_scenario(seed)
    sim = simulate(np.zeros(5), g, s, safeguards=OFF)
    assert np.array_equal(sim.m, s)
    assert np.allclose(sim.l, iir_filter(g, s), atol=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_perfect_cancellation(seed):
    f, g, s = random_scenario(seed)
    # the canceller output removes F l from what G sees, so the loop opens:
    # l = G s, while the microphone still carries the feedback, m = s + F l
    sim = simulate(f, g, s, f_hat0=f, safeguards=OFF)
    l_open = iir_filter(g, s)
    assert np.max(np.abs(sim.l - l_open)) < 1e-10
    assert np.max(np.abs(sim.m - (s + fir_filter(f, l_open)))) < 1e-10


def test_linearity_without_clipping():
    f, g, s = random_scenario(7)
    a = simulate(f, g, s, safeguards=OFF)
    b = simulate(f, g, 2.0 * s, safeguards=OFF)
    assert np.allclose(b.m, 2.0 * a.m, rtol=1e-12, atol=1e-12)
    assert np.allclose(b.l, 2.0 * a.l, rtol=1e-12, atol=1e-12)


def test_unstable_loop_is_reported():
    s = white_noise(5000, 0)
    with pytest.raises(SimulationError) as info:
        simulate([1.0], make_delay(1).scaled(1.5), s, safeguards=OFF)
    assert info.value.index > 0


def test_fixed_kernel_matches_python_loop():
    f, g, s = random_scenario(3)
    s = s * 4.0  # make clipping happen
    fast = simulate(f, g, s)
    slow = simulate(f, g, s, controller=lambda k, m, l: None)
    assert fast.trace.amp_clips > 0 and fast.trace.amp_clips == slow.trace.amp_clips
    assert np.allclose(fast.m, slow.m, atol=1e-12) and np.allclose(fast.l, slow.l, atol=1e-12)


def test_callable_controller_and_warmup_gating():
    f, g, s = random_scenario(4, 200)
    seen = []

    def ctrl(k, m, l):
        seen.append(len(m))
        return f if k == 9 else None

    guards = Safeguards(warmup=50 / 16000)
    gated = simulate(f, g, s, controller=ctrl, safeguards=guards, snapshot_every=10)
    assert seen == list(range(1, 201))
    # the estimate arrived at k = 9, before warm-up ended: loop canceller stays zero
    assert all(np.array_equal(snap, np.zeros(12)) for _, snap in gated.trace.snapshots)
    assert np.array_equal(gated.trace.f_hat, f)
    early = simulate(f, g, s, controller=ctrl, safeguards=Safeguards(warmup=0.0), snapshot_every=10)
    assert np.array_equal(early.trace.snapshots[1][1], f)
    assert not np.allclose(early.l, gated.l)


def test_coefficient_clipping_from_controller():
    f, g, s = random_scenario(5, 50)
    sim = simulate(f, g, s, controller=lambda k, m, l: np.full(12, 50.0), safeguards=Safeguards(warmup=1.0))
    assert np.all(sim.trace.f_hat == 10.0) and "coeff_clipped" in sim.trace.flags


def test_rls_controller_validation():
    with pytest.raises(ValueError):
        RlsController(3, 5, 4, 1.0)
    with pytest.raises(ValueError):
        RlsController.for_signal(np.zeros(10), 3, 4)
    c = RlsController.for_signal(np.full(10, 2.0), 3, 4)
    assert c.L_B == 6 and c.dim == 8 and np.isclose(c.delta, 4e-4)


@pytest.mark.parametrize("clip", [False, True])
def test_compiled_rls_matches_reference_controller(clip):
    f, g, s = random_scenario(6, 1500)
    spec = RlsController.for_signal(s, 4, 12)
    guards = Safeguards(warmup=300 / 16000, enabled=clip)
    fast = simulate(f, g, s, controller=spec, safeguards=guards, snapshot_every=100)
    ref = PythonRlsController(spec, coeff_clip=10.0 if clip else None)
    slow = simulate(f, g, s, controller=ref, safeguards=guards, snapshot_every=100)
    assert np.allclose(fast.m, slow.m, rtol=1e-7, atol=1e-9)
    assert np.allclose(fast.l, slow.l, rtol=1e-7, atol=1e-9)
    assert np.allclose(fast.trace.f_hat, slow.trace.f_hat, rtol=1e-6, atol=1e-8)
    assert len(fast.trace.snapshots) == len(slow.trace.snapshots) == 15


def test_rls_in_loop_converges():
    rng = np.random.default_rng(11)
    f = rng.standard_normal(8) * np.exp(-np.arange(8) / 3)
    f -= f.mean()
    g0 = make_delay(6)
    g = g0.scaled(calibrate_gain(g0, f))
    s = 0.05 * ar_generate([1.0, -0.7], white_noise(40_000, 1))
    spec = RlsController.for_signal(s, 2, 8)
    sim = simulate(f, g, s, controller=spec, safeguards=Safeguards(warmup=0.5))
    err = np.linalg.norm(sim.trace.f_hat - f) / np.linalg.norm(f)
    assert err < 0.05 and sim.trace.rls_faults == 0
