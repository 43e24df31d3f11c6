"""
Sample-by-sample simulation of the microphone/loudspeaker loop.

    m[k] = F(q) l[k] + s[k]
    l[k] = G(q) (m[k] - F_hat0(q) l[k])

Per sample the order is fixed: the loudspeaker sample l[k] is produced from
strictly past data (G has at least one sample of delay) and saturated, then
the microphone sample m[k] is formed, then the compensated signal
e[k] = m[k] - F_hat0 l[k] that feeds G, and finally the controller (if any)
adapts. A controller estimate only replaces F_hat0 in the loop once the
warm-up period is over.

Two compiled kernels cover the common cases (fixed canceller, in-loop
2ch-AFC RLS); any other controller runs through a plain Python loop.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .afc import burn_in, recover_feedback, regressors, rls_init, rls_update
from .signals import RationalFilter, as_coeffs, as_signal, power


class SimulationError(RuntimeError):
    def __init__(self, index, message="non-finite sample"):
        super().__init__(f"{message} at sample {index}")
        self.index = index


@dataclass(frozen=True)
class Safeguards:
    coeff_clip: float = 10.0
    amp_clip: float = 1.0
    warmup: float = 1.0
    enabled: bool = True

    def __post_init__(self):
        if self.coeff_clip <= 0 or self.amp_clip <= 0 or self.warmup < 0:
            raise ValueError("safeguard thresholds must be positive")

    @classmethod
    def disabled(cls, warmup=0.0):
        return cls(warmup=warmup, enabled=False)


@dataclass
class Trace:
    amp_clips: int = 0
    coeff_clips: int = 0
    rls_faults: int = 0
    warmup_index: int = 0
    snapshots: list = field(default_factory=list)
    f_hat: np.ndarray = None
    weights: np.ndarray = None

    @property
    def flags(self):
        out = []
        if self.amp_clips:
            out.append("amp_clipped")
        if self.coeff_clips:
            out.append("coeff_clipped")
        if self.rls_faults:
            out.append("rls_fault")
        return tuple(out)


@dataclass
class SimulationResult:
    m: np.ndarray
    l: np.ndarray
    trace: Trace


@dataclass(frozen=True)
class RlsController:
    """In-loop 2ch-AFC estimator updated by RLS at every sample from the burn-in on."""

    L_A: int
    L_B: int
    L_F_hat: int
    delta: float
    lam: float = 1.0
    remove_dc: bool = True

    def __post_init__(self):
        if self.L_B != self.L_A + self.L_F_hat - 1:
            raise ValueError("L_B must equal L_A + L_F_hat - 1")

    @classmethod
    def for_signal(cls, s, L_A, L_F_hat, **kwargs):
        """P initialized to I / (1e-4 * signal power)."""
        p = power(s)
        if p == 0.0:
            raise ValueError("cannot scale RLS initialization from a zero-power signal")
        return cls(L_A, L_A + L_F_hat - 1, L_F_hat, 1e-4 * p, **kwargs)

    @property
    def dim(self):
        return self.L_A - 1 + self.L_B


@njit(cache=True)
def _clip(x, limit):
    if x > limit:
        return limit, 1
    if x < -limit:
        return -limit, 1
    return x, 0


@njit(cache=True)
def _loudspeaker(k, num, den, e, y):
    acc = 0.0
    for i in range(1, min(num.size, k + 1)):
        acc += num[i] * e[k - i]
    for j in range(1, min(den.size, k + 1)):
        acc -= den[j] * y[k - j]
    return acc


@njit(cache=True)
def _fir_at(k, taps, x):
    acc = 0.0
    for i in range(min(taps.size, k + 1)):
        acc += taps[i] * x[k - i]
    return acc


@njit(cache=True)
def _run_fixed(f, num, den, f_hat0, s, amp_clip, clip_on):
    n = s.size
    m = np.zeros(n)
    l = np.zeros(n)
    e = np.zeros(n)
    y = np.zeros(n)
    clips = 0
    for k in range(n):
        y[k] = _loudspeaker(k, num, den, e, y)
        lk = y[k]
        if clip_on:
            lk, c = _clip(lk, amp_clip)
            clips += c
        l[k] = lk
        m[k] = _fir_at(k, f, l) + s[k]
        e[k] = m[k] - _fir_at(k, f_hat0, l)
        if not (np.isfinite(m[k]) and np.isfinite(y[k])):
            return m, l, clips, k
    return m, l, clips, -1


@njit(cache=True)
def _recover_into(w, p, L_F_hat, remove_dc, out):
    # f_hat = -B/A with a = [1, w[:p]], b = w[p:]
    for k in range(L_F_hat):
        acc = -w[p + k] if p + k < w.size else 0.0
        for j in range(1, min(k, p) + 1):
            acc -= w[j - 1] * out[k - j]
        out[k] = acc
    if remove_dc:
        mean = 0.0
        for k in range(L_F_hat):
            mean += out[k]
        mean /= L_F_hat
        for k in range(L_F_hat):
            out[k] -= mean


@njit(cache=True)
def _run_rls(f, num, den, s, L_A, L_B, L_F_hat, delta, lam, remove_dc,
             amp_clip, coeff_clip, clip_on, warmup_index, snap_every):
    n = s.size
    p = L_A - 1
    dim = p + L_B
    m = np.zeros(n)
    l = np.zeros(n)
    e = np.zeros(n)
    y = np.zeros(n)
    P = np.eye(dim) / delta
    w = np.zeros(dim)
    x = np.zeros(dim)
    Px = np.zeros(dim)
    f_hat = np.zeros(L_F_hat)
    f_loop = np.zeros(L_F_hat)
    k0 = max(L_A, L_B)
    n_snap = 0 if snap_every <= 0 else (n + snap_every - 1) // snap_every
    snaps = np.zeros((n_snap, L_F_hat))
    amp_clips = 0
    coeff_clips = 0
    faults = 0
    for k in range(n):
        y[k] = _loudspeaker(k, num, den, e, y)
        lk = y[k]
        if clip_on:
            lk, c = _clip(lk, amp_clip)
            amp_clips += c
        l[k] = lk
        m[k] = _fir_at(k, f, l) + s[k]
        e[k] = m[k] - _fir_at(k, f_loop, l)
        if not (np.isfinite(m[k]) and np.isfinite(y[k])):
            return m, l, f_hat, w, snaps, amp_clips, coeff_clips, faults, k
        if k >= k0:
            for i in range(p):
                x[i] = m[k - 1 - i]
            for i in range(L_B):
                x[p + i] = l[k - i]
            denom = lam
            eps = m[k]
            for i in range(dim):
                acc = 0.0
                for j in range(dim):
                    acc += P[i, j] * x[j]
                Px[i] = acc
                denom += x[i] * acc
                eps += w[i] * x[i]
            ok = np.isfinite(denom) and denom > 0.0
            if ok:
                for i in range(dim):
                    if not np.isfinite(Px[i] / denom * eps):
                        ok = False
            if ok:
                for i in range(dim):
                    w[i] -= Px[i] / denom * eps
                    if clip_on:
                        w[i], c = _clip(w[i], coeff_clip)
                        coeff_clips += c
                # symmetric rank-one downdate keeps P exactly symmetric
                for i in range(dim):
                    gi = Px[i] / denom
                    for j in range(i, dim):
                        v = (P[i, j] - gi * Px[j]) / lam
                        P[i, j] = v
                        P[j, i] = v
            else:
                faults += 1
            _recover_into(w, p, L_F_hat, remove_dc, f_hat)
            if clip_on:
                for i in range(L_F_hat):
                    f_hat[i], c = _clip(f_hat[i], coeff_clip)
                    coeff_clips += c
            if k >= warmup_index:
                for i in range(L_F_hat):
                    f_loop[i] = f_hat[i]
        if snap_every > 0 and k % snap_every == 0:
            for i in range(L_F_hat):
                snaps[k // snap_every, i] = f_loop[i]
    return m, l, f_hat, w, snaps, amp_clips, coeff_clips, faults, -1


def _check_forward(g):
    if not isinstance(g, RationalFilter):
        g = RationalFilter(g)
    if g.numerator[0] != 0.0:
        raise ValueError("forward path needs at least one sample of delay (numerator[0] == 0)")
    return g


def _snapshot_list(snaps, every):
    return [(i * every, row.copy()) for i, row in enumerate(snaps)]


def simulate(f, g, s, controller=None, safeguards=Safeguards(), f_hat0=None,
             sample_rate=16000, snapshot_every=0):
    """
    Run the closed loop for the input ``s``.

    Parameters
    ----------
    f : array_like
        True feedback path taps.
    g : RationalFilter
        Forward path; its numerator must start with at least one zero.
    s : array_like
        Source signal at the microphone.
    controller : RlsController, callable or None
        ``None`` keeps ``f_hat0`` fixed. A callable is invoked as
        ``controller(k, m, l)`` after each sample with the signal histories
        up to and including ``k`` and may return a new canceller.
    f_hat0 : array_like, optional
        Initial (or fixed) in-loop canceller; zeros of length ``len(f)`` by default.
    snapshot_every : int
        Record the in-loop canceller every this many samples (0 disables).

    Returns
    -------
    SimulationResult
    """
    f = as_coeffs(f, "feedback path")
    g = _check_forward(g)
    s = as_signal(s, "s")
    clip_on = safeguards.enabled
    warmup_index = int(round(safeguards.warmup * sample_rate))
    trace = Trace(warmup_index=warmup_index)

    if isinstance(controller, RlsController):
        out = _run_rls(f, g.numerator, g.denominator, s, controller.L_A, controller.L_B,
                       controller.L_F_hat, controller.delta, controller.lam, controller.remove_dc,
                       safeguards.amp_clip, safeguards.coeff_clip, clip_on, warmup_index,
                       int(snapshot_every))
        m, l, f_hat, w, snaps, trace.amp_clips, trace.coeff_clips, trace.rls_faults, bad = out
        if bad >= 0:
            raise SimulationError(bad)
        trace.f_hat, trace.weights = f_hat, w
        trace.snapshots = _snapshot_list(snaps, snapshot_every)
        return SimulationResult(m, l, trace)

    f_hat0 = np.zeros(f.size) if f_hat0 is None else as_coeffs(f_hat0, "f_hat0")
    if controller is None:
        m, l, trace.amp_clips, bad = _run_fixed(f, g.numerator, g.denominator, f_hat0, s,
                                                safeguards.amp_clip, clip_on)
        if bad >= 0:
            raise SimulationError(bad)
        trace.f_hat = f_hat0.copy()
        if snapshot_every:
            trace.snapshots = [(k, f_hat0.copy()) for k in range(0, s.size, snapshot_every)]
        return SimulationResult(m, l, trace)

    return _simulate_python(f, g, s, controller, safeguards, f_hat0, warmup_index,
                            snapshot_every, trace)


def _simulate_python(f, g, s, controller, safeguards, f_hat0, warmup_index, snapshot_every, trace):
    num, den = g.numerator, g.denominator
    n = s.size
    m, l, e, y = (np.zeros(n) for _ in range(4))
    f_loop = f_hat0.copy()
    clip_on = safeguards.enabled
    for k in range(n):
        i = np.arange(1, min(num.size, k + 1))
        j = np.arange(1, min(den.size, k + 1))
        acc = num[i] @ e[k - i] - den[j] @ y[k - j]
        y[k] = acc
        lk = acc
        if clip_on and abs(lk) > safeguards.amp_clip:
            lk = np.copysign(safeguards.amp_clip, lk)
            trace.amp_clips += 1
        l[k] = lk
        hist = l[k::-1]
        m[k] = np.dot(f[:hist.size], hist[:f.size]) + s[k]
        e[k] = m[k] - np.dot(f_loop[:hist.size], hist[:f_loop.size])
        if not (np.isfinite(m[k]) and np.isfinite(y[k])):
            raise SimulationError(k)
        update = controller(k, m[:k + 1], l[:k + 1])
        if update is not None:
            update = np.asarray(update, dtype=float)
            if clip_on:
                over = np.abs(update) > safeguards.coeff_clip
                trace.coeff_clips += int(np.count_nonzero(over))
                update = np.clip(update, -safeguards.coeff_clip, safeguards.coeff_clip)
            trace.f_hat = update
            if k >= warmup_index:
                f_loop = update.copy()
        if snapshot_every and k % snapshot_every == 0:
            trace.snapshots.append((k, f_loop.copy()))
    if trace.f_hat is None:
        trace.f_hat = f_loop.copy()
    return SimulationResult(m, l, trace)


class PythonRlsController:
    """
    Reference in-loop RLS controller built on ``rls_update``.

    Slow; mirrors what the compiled ``RlsController`` path does and exists to
    cross-check it and as a template for custom controllers.
    """

    def __init__(self, spec, coeff_clip=None):
        self.spec = spec
        self.state = rls_init(spec.dim, spec.delta, spec.lam)
        self.k0 = burn_in(spec.L_A, spec.L_B)
        self.coeff_clip = coeff_clip

    def __call__(self, k, m, l):
        if k < self.k0:
            return None
        x = regressors(m, l, self.spec.L_A, self.spec.L_B, k, k + 1)[0]
        self.state = rls_update(self.state, m[k], x)
        if self.coeff_clip is not None:
            w = np.clip(self.state.w, -self.coeff_clip, self.coeff_clip)
            self.state = type(self.state)(self.state.P, w, self.state.lam, self.state.n, self.state.faults)
        p = self.spec.L_A - 1
        a = np.concatenate([[1.0], self.state.w[:p]])
        return recover_feedback(a, self.state.w[p:], self.spec.L_F_hat, remove_dc=self.spec.remove_dc)
