"""
Frequency-domain evaluation of the feedback loop.

The maximum stable gain (MSG) is read off the loop response G(w)F(w) at the
frequencies where its phase is a multiple of 2*pi. Those frequencies are
located as zero crossings of the wrapped phase on a uniform grid and refined
by linear interpolation; the loop is then evaluated exactly at the refined
frequencies.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .signals import RationalFilter, as_coeffs

DB_CLAMP = 200.0
RESIDUAL_FLOOR = 1e-10


@dataclass(frozen=True)
class FrequencyGrid:
    n_points: int = 4096

    def __post_init__(self):
        if self.n_points < 64:
            raise ValueError("frequency grid needs at least 64 points")

    @property
    def omega(self):
        return np.linspace(0.0, np.pi, self.n_points)


DEFAULT_GRID = FrequencyGrid()


@dataclass
class MetricsReport:
    msg_db: float
    asg_db: float
    kappa: float
    misalignment_db: float
    flags: tuple = field(default_factory=tuple)


def _num_den(filt):
    if isinstance(filt, RationalFilter):
        return filt.numerator, filt.denominator
    return as_coeffs(filt), np.ones(1)


def freq_response(filt, grid=DEFAULT_GRID):
    """
    Evaluate ``filt`` at the radial frequencies of ``grid``.

    ``grid`` may also be an explicit array of frequencies in rad/sample.
    """
    omega = grid.omega if isinstance(grid, FrequencyGrid) else np.asarray(grid, dtype=float)
    num, den = _num_den(filt)
    if omega.size == 0:
        return np.zeros(0, dtype=complex)
    _, h = sps.freqz(num, den, worN=omega)
    return h


def phase_crossings(omega, h):
    """Frequencies where angle(h) is a multiple of 2*pi, linearly interpolated."""
    ph = np.angle(h)
    exact = omega[(np.abs(ph) <= 1e-12) & (np.abs(h) > 0)]
    p0, p1 = ph[:-1], ph[1:]
    # sign change without a +-pi wrap between neighbours
    cross = (p0 * p1 < 0) & (np.abs(p1 - p0) < np.pi)
    i = np.flatnonzero(cross)
    w = omega[i] - p0[i] * (omega[i + 1] - omega[i]) / (p1[i] - p0[i])
    return np.unique(np.concatenate([exact, w]))


def critical_frequencies(g, f, grid=DEFAULT_GRID):
    """
    The set of potentially unstable frequencies of the loop G(w)F(w).

    Returns ``(omega, fallback)``; when no phase crossing exists the whole
    grid is returned and ``fallback`` is True.
    """
    omega = grid.omega
    loop = freq_response(g, omega) * freq_response(f, omega)
    if not np.any(np.abs(loop) > 0):
        raise ValueError("loop response G(w)F(w) is identically zero")
    crit = phase_crossings(omega, loop)
    if crit.size == 0:
        return omega, True
    return crit, False


def loop_peak(g, f, grid=DEFAULT_GRID):
    crit, fallback = critical_frequencies(g, f, grid)
    peak = np.max(np.abs(freq_response(g, crit) * freq_response(f, crit)))
    return float(peak), fallback


def msg(g, f, grid=DEFAULT_GRID):
    """Maximum stable gain in dB: -20 log10 of the loop peak over the critical set."""
    peak, _ = loop_peak(g, f, grid)
    if peak == 0.0:
        raise ValueError("loop response vanishes on the critical frequencies")
    return float(-20.0 * np.log10(peak))


def asg_details(g, f, f_hat, grid=DEFAULT_GRID):
    crit, fallback = critical_frequencies(g, f, grid)
    G = freq_response(g, crit)
    F = freq_response(f, crit)
    F_hat = freq_response(f_hat, crit)
    loop = np.max(np.abs(G * F))
    residual = np.max(np.abs(G * (F - F_hat)))
    flags = ["msg_fallback"] if fallback else []
    if residual < RESIDUAL_FLOOR:
        flags.append("asg_clamped")
        return DB_CLAMP, tuple(flags)
    return float(20.0 * np.log10(loop) - 20.0 * np.log10(residual)), tuple(flags)


def asg(g, f, f_hat, grid=DEFAULT_GRID):
    """
    Added stable gain in dB from inserting ``f_hat`` as feedback canceller.

    Both the uncancelled and the residual loop are evaluated on the critical
    frequencies of G(w)F(w). A residual below 1e-10 clamps the result at
    +200 dB.
    """
    value, _ = asg_details(g, f, f_hat, grid)
    return value


def misalignment(f, f_hat):
    """Normalized coefficient error 20 log10(||f - f_hat|| / ||f||), floored at -200 dB."""
    f = as_coeffs(f, "f")
    f_hat = as_coeffs(f_hat, "f_hat")
    n = max(f.size, f_hat.size)
    f = np.pad(f, (0, n - f.size))
    f_hat = np.pad(f_hat, (0, n - f_hat.size))
    ref = np.linalg.norm(f)
    if ref == 0.0:
        raise ValueError("reference feedback path has zero norm")
    err = np.linalg.norm(f - f_hat)
    if err == 0.0:
        return -DB_CLAMP
    return float(max(20.0 * np.log10(err / ref), -DB_CLAMP))
