"""Single-scenario pipelines: offline (batch) and recursive (in-loop RLS) identification."""

from dataclasses import dataclass

import numpy as np

from ..afc import build_normal_equations, solve_batch
from ..closed_loop import RlsController, Safeguards, SimulationError, simulate
from ..forward_paths import calibrate_gain
from ..metrics import FrequencyGrid, MetricsReport, asg_details, critical_frequencies, misalignment, msg
from ..signals import mix_at_snr
from .io import load_coefficients, load_wav
from .synthetic import make_ar_model, make_feedback_path, speech_shaped_noise


class ScenarioError(RuntimeError):
    pass


@dataclass
class Setup:
    f: np.ndarray
    g: object
    gain: float
    s: np.ndarray
    d: np.ndarray


@dataclass
class ScenarioRun:
    config: object
    setup: Setup
    m: np.ndarray
    l: np.ndarray
    f_hat: np.ndarray
    correlation: object
    report: MetricsReport


def feedback_path_for(cfg):
    if cfg.feedback_path_file:
        f = load_coefficients(cfg.feedback_path_file)
        if f.size != cfg.L_F:
            raise ValueError(f"{cfg.feedback_path_file}: {f.size} taps, config says L_F={cfg.L_F}")
        return f
    return make_feedback_path(cfg.L_F, cfg.seed, cfg.decay_tau, grid=FrequencyGrid(cfg.grid_points))


def input_for(cfg):
    """Source signal s (speech surrogate or WAV), with optional babble surrogate at ``snr_db``."""
    n = cfg.n_samples
    d = None
    if cfg.input == "ar":
        d = make_ar_model(cfg.L_D, cfg.ar_seed, cfg.sample_rate)
        s = speech_shaped_noise(d, n, cfg.input_seed, rms=cfg.input_rms)
    else:
        s = load_wav(cfg.wav_path, cfg.sample_rate).samples
        if s.size < n:
            raise ValueError(f"{cfg.wav_path}: {s.size} samples, scenario needs {n}")
        s = s[:n].copy()
    if cfg.snr_db is not None:
        dv = make_ar_model(cfg.L_D, cfg.noise_seed, cfg.sample_rate)
        v = speech_shaped_noise(dv, n, cfg.noise_seed + 1)
        s = mix_at_snr(s, v, cfg.snr_db)
    return s, d


def prepare(cfg):
    f = feedback_path_for(cfg)
    g_unit = cfg.forward_spec().build()
    gain = calibrate_gain(g_unit, f, cfg.margin_db, FrequencyGrid(cfg.grid_points))
    s, d = input_for(cfg)
    return Setup(f, g_unit.scaled(gain), gain, s, d)


def safeguards_for(cfg):
    return Safeguards(coeff_clip=cfg.coeff_clip, amp_clip=cfg.amp_clip, warmup=cfg.warmup)


def execute_scenario(cfg):
    """Simulate, identify and evaluate one scenario; returns all intermediate data."""
    setup = prepare(cfg)
    guards = safeguards_for(cfg)
    try:
        if cfg.mode == "offline":
            sim = simulate(setup.f, setup.g, setup.s, safeguards=guards, sample_rate=cfg.sample_rate)
        else:
            ctrl = RlsController.for_signal(setup.s, cfg.L_A, cfg.L_F_hat, remove_dc=cfg.dc_removal)
            sim = simulate(setup.f, setup.g, setup.s, controller=ctrl, safeguards=guards,
                           sample_rate=cfg.sample_rate)
    except SimulationError as exc:
        raise ScenarioError(f"{exc} (config {cfg.digest()[:12]})") from exc

    cs = build_normal_equations(sim.m, sim.l, cfg.L_A, cfg.L_B)
    flags = list(sim.trace.flags)
    if cfg.mode == "offline":
        sol = solve_batch(cs)
        f_hat = sol.feedback_path(cfg.L_F_hat, remove_dc=cfg.dc_removal)
        kappa = sol.kappa
        if sol.degenerate:
            flags.append("degenerate")
    else:
        f_hat = sim.trace.f_hat
        kappa = solve_batch(cs).kappa
    if kappa > cfg.kappa_threshold:
        flags.append("ill_conditioned")

    grid = FrequencyGrid(cfg.grid_points)
    asg_db, asg_flags = asg_details(setup.g, setup.f, f_hat, grid)
    flags.extend(asg_flags)
    report = MetricsReport(
        msg_db=msg(setup.g, setup.f, grid),
        asg_db=asg_db,
        kappa=kappa,
        misalignment_db=misalignment(setup.f, f_hat),
        flags=tuple(flags),
    )
    return ScenarioRun(cfg, setup, sim.m, sim.l, f_hat, cs, report)


def run_scenario(cfg):
    return execute_scenario(cfg).report


def identifiable(cfg):
    """Whether the forward path meets the delay or the feedforward-length condition."""
    spec = cfg.forward_spec()
    if spec.kind == "delay":
        return spec.alpha >= cfg.L_A
    return spec.L_GN > cfg.L_A


def probe(cfg):
    """Conditioning report of R for a scenario, without solving for the estimate."""
    setup = prepare(cfg)
    guards = safeguards_for(cfg)
    if cfg.mode == "offline":
        sim = simulate(setup.f, setup.g, setup.s, safeguards=guards, sample_rate=cfg.sample_rate)
    else:
        ctrl = RlsController.for_signal(setup.s, cfg.L_A, cfg.L_F_hat, remove_dc=cfg.dc_removal)
        sim = simulate(setup.f, setup.g, setup.s, controller=ctrl, safeguards=guards,
                       sample_rate=cfg.sample_rate)
    cs = build_normal_equations(sim.m, sim.l, cfg.L_A, cfg.L_B)
    sv = np.linalg.svd(cs.R, compute_uv=False)
    _, fallback = critical_frequencies(setup.g, setup.f, FrequencyGrid(cfg.grid_points))
    kappa = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    return {
        "kappa": kappa,
        "sigma_max": float(sv[0]),
        "sigma_min": float(sv[-1]),
        "dim": int(sv.size),
        "predicted_identifiable": identifiable(cfg),
        "ill_conditioned": bool(kappa > cfg.kappa_threshold),
        "gain": setup.gain,
        "msg_fallback": fallback,
    }
