"""
Forward-path families (microphone to loudspeaker processing) and gain calibration.

Every constructor returns a unit-gain ``RationalFilter``; the loop gain is
set afterwards with ``calibrate_gain`` and applied to the numerator only.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .metrics import DEFAULT_GRID, FrequencyGrid, loop_peak
from .signals import RationalFilter, as_coeffs, max_pole_radius

KINDS = ("fir", "iir_ap", "delay")
MAX_SEED_RETRIES = 32


@dataclass(frozen=True)
class ForwardPathSpec:
    """
    Parameters of one forward path.

    For ``kind="delay"`` the filter is a pure delay of ``alpha`` samples and
    ``L_GN`` is ignored; ``delay1``/``delay2`` in the harness map onto it.
    """

    kind: str = "iir_ap"
    L_GN: int = 15
    alpha: int = 1
    seed: int = 0
    gain: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown forward-path kind {self.kind!r}; expected one of {KINDS}")
        if self.alpha < 1:
            raise ValueError("alpha must be at least 1 sample to avoid an algebraic loop")
        if self.kind != "delay" and self.L_GN <= self.alpha:
            raise ValueError(f"need L_GN > alpha, got L_GN={self.L_GN}, alpha={self.alpha}")
        if self.gain <= 0:
            raise ValueError("gain must be positive")

    @property
    def L_GD(self):
        return self.L_GN if self.kind == "iir_ap" else 1

    def build(self):
        if self.kind == "fir":
            g = make_fir_forward(self.L_GN, self.alpha, self.seed)
        elif self.kind == "iir_ap":
            g = make_iir_allpass(self.L_GN, self.alpha, self.seed)
        else:
            g = make_delay(self.alpha)
        return g if self.gain == 1.0 else g.scaled(self.gain)


def _check_alpha(L_GN, alpha):
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    if alpha >= L_GN:
        raise ValueError(f"alpha ({alpha}) must be smaller than L_GN ({L_GN})")


def _taps(n, alpha, seed):
    # one draw per seed, leading taps zeroed: filters for different alpha share their tail
    x = np.random.default_rng(seed).standard_normal(n)
    x[:alpha] = 0.0
    return x


def make_fir_forward(L_GN, alpha, seed):
    """FIR forward path: ``alpha`` zeros followed by standard-normal taps."""
    _check_alpha(L_GN, alpha)
    return RationalFilter(_taps(L_GN, alpha, seed))


def _allpass_from_denominator(den, alpha):
    num = den[::-1].copy()
    num[:alpha] = 0.0
    return RationalFilter(num, den)


def make_iir_allpass(L_GN, alpha, seed):
    """
    Stationary all-pass forward path with ``alpha`` leading zeros.

    The numerator is ``[0]*alpha + x + [1]`` with standard-normal ``x`` and the
    denominator is its reversal, which is monic by construction. An unstable
    draw has its poles pulled in to radius 0.9; if that fails numerically the
    next seed is tried.
    """
    _check_alpha(L_GN, alpha)
    for attempt in range(MAX_SEED_RETRIES):
        num = np.concatenate([_taps(L_GN - 1, alpha, seed + attempt), [1.0]])
        den = num[::-1].copy()
        radius = max_pole_radius(den)
        if radius >= 1.0:
            den = den * (0.9 / radius) ** np.arange(den.size)
        try:
            return _allpass_from_denominator(den, alpha)
        except ValueError:
            continue
    raise RuntimeError(f"no stable all-pass filter after {MAX_SEED_RETRIES} seeds starting at {seed}")


def make_delay(delay, allow_zero=False):
    """Pure delay of ``delay`` samples with unit gain."""
    if delay < 0 or (delay == 0 and not allow_zero):
        raise ValueError("delay must be >= 1 sample")
    if delay == 0:
        warnings.warn("zero-delay forward path creates an algebraic loop; test use only", stacklevel=2)
    return RationalFilter(np.concatenate([np.zeros(delay), [1.0]]))


def calibrate_gain(g_unit, f, margin_db=3.0, grid=DEFAULT_GRID):
    """Scalar gain putting the loop ``margin_db`` below its maximum stable gain."""
    f = as_coeffs(f, "feedback path")
    if isinstance(grid, int):
        grid = FrequencyGrid(grid)
    peak, _ = loop_peak(g_unit, f, grid)
    if peak == 0.0:
        raise ValueError("loop response vanishes on the critical frequencies")
    return float(10.0 ** (-margin_db / 20.0) / peak)
