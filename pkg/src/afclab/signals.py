"""
Signal generation and filtering primitives.

Signals are plain one-dimensional float64 numpy arrays; the sample rate is
carried by whoever owns the signal (scenario config, WAV loader). All filters
are causal with zero initial state.
"""

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

STABILITY_MARGIN = 1e-9


def as_coeffs(taps, name="coefficients"):
    """Validate and return a finite, non-empty float64 coefficient vector."""
    taps = np.atleast_1d(np.asarray(taps, dtype=float))
    if taps.ndim != 1 or taps.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(taps)):
        raise ValueError(f"{name} contain non-finite values")
    return taps


def as_signal(x, name="signal"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite samples")
    return x


def max_pole_radius(den):
    """Largest root magnitude of ``den`` read as a polynomial in q^-1."""
    den = np.trim_zeros(np.asarray(den, dtype=float), "b")
    if den.size <= 1:
        return 0.0
    return float(np.max(np.abs(np.roots(den))))


@dataclass(frozen=True, eq=False)
class RationalFilter:
    """Stable IIR filter num(q^-1) / den(q^-1) with a monic denominator."""

    numerator: np.ndarray
    denominator: np.ndarray = None

    def __post_init__(self):
        num = as_coeffs(self.numerator, "numerator")
        den = as_coeffs(1.0 if self.denominator is None else self.denominator, "denominator")
        if den[0] != 1.0:
            raise ValueError(f"denominator must be monic, got leading coefficient {den[0]!r}")
        radius = max_pole_radius(den)
        if radius >= 1.0 - STABILITY_MARGIN:
            raise ValueError(f"unstable denominator (max pole radius {radius:.6g})")
        num.flags.writeable = False
        den.flags.writeable = False
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    @property
    def is_fir(self):
        return self.denominator.size == 1

    @property
    def delay(self):
        """Number of leading zero numerator taps (the forward-path delay)."""
        nz = np.flatnonzero(self.numerator)
        return int(nz[0]) if nz.size else self.numerator.size

    def scaled(self, gain):
        return RationalFilter(gain * self.numerator, self.denominator)

    def __repr__(self):
        return f"RationalFilter(numerator={self.numerator.tolist()}, denominator={self.denominator.tolist()})"


def fir_filter(f, x):
    f = as_coeffs(f, "FIR taps")
    x = as_signal(x)
    if x.size == 0:
        return x.copy()
    return sps.lfilter(f, [1.0], x)


def iir_filter(g, x):
    x = as_signal(x)
    if x.size == 0:
        return x.copy()
    if g.is_fir:
        return fir_filter(g.numerator, x)
    return sps.lfilter(g.numerator, g.denominator, x)


def white_noise(n, seed):
    """``n`` i.i.d. standard-normal samples, reproducible for a given seed."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return np.random.default_rng(seed).standard_normal(int(n))


def check_ar_model(d):
    d = as_coeffs(d, "AR polynomial")
    if d[0] != 1.0:
        raise ValueError("AR polynomial must be monic (d[0] == 1)")
    radius = max_pole_radius(d)
    if radius >= 1.0 - STABILITY_MARGIN:
        raise ValueError(f"AR model 1/D(q) is unstable (max pole radius {radius:.6g})")
    return d


def ar_generate(d, w):
    """All-pole synthesis s = w / D(q)."""
    d = check_ar_model(d)
    w = as_signal(w)
    if w.size == 0:
        return w.copy()
    return sps.lfilter([1.0], d, w)


def autocorrelation(x, maxlag):
    """Biased autocorrelation estimate r[0..maxlag] (sum of lagged products / N)."""
    x = as_signal(x)
    n = x.size
    nfft = 1 << int(np.ceil(np.log2(2 * n - 1))) if n > 1 else 2
    spec = np.fft.rfft(x, nfft)
    r = np.fft.irfft(spec * np.conj(spec), nfft)[: maxlag + 1]
    if r.size < maxlag + 1:
        r = np.concatenate([r, np.zeros(maxlag + 1 - r.size)])
    return r / n


def levinson(r, order):
    """
    Levinson-Durbin recursion on autocorrelation values ``r[0..order]``.

    Returns
    -------
    d : ndarray
        Monic prediction-error polynomial of length ``order + 1``.
    k : ndarray
        Reflection coefficients, one per stage.
    err : float
        Final prediction-error power.
    """
    r = np.asarray(r, dtype=float)
    if r[0] <= 0.0:
        raise ValueError("zero-energy input: autocorrelation r[0] must be positive")
    d = np.zeros(order + 1)
    d[0] = 1.0
    k = np.zeros(order)
    err = r[0]
    for i in range(1, order + 1):
        acc = r[i] + np.dot(d[1:i], r[i - 1:0:-1])
        ki = -acc / err
        d[1:i + 1] = d[1:i + 1] + ki * d[i - 1::-1][:i]
        k[i - 1] = ki
        err *= 1.0 - ki * ki
    return d, k, err


def lpc(x, order):
    """
    Monic LPC polynomial of ``x`` by the autocorrelation method.

    The result minimizes the mean-squared forward prediction error and is
    minimum phase, so ``ar_generate`` can use it directly.
    """
    if order < 0:
        raise ValueError("order must be non-negative")
    x = as_signal(x)
    if x.size <= order:
        raise ValueError(f"need more than {order} samples, got {x.size}")
    r = autocorrelation(x, order)
    if r[0] <= 0.0:
        raise ValueError("zero-energy input")
    d, _, _ = levinson(r, order)
    return d


def power(x):
    return float(np.mean(np.square(x))) if len(x) else 0.0


def mix_at_snr(s, v, snr_db):
    """Return s + c*v with c set so that 10*log10(P_s / P_cv) equals ``snr_db``."""
    s = as_signal(s, "s")
    v = as_signal(v, "v")
    if s.size != v.size:
        raise ValueError(f"length mismatch: {s.size} vs {v.size}")
    pv = power(v)
    if pv == 0.0:
        raise ValueError("noise signal has zero power")
    c = np.sqrt(power(s) / (pv * 10.0 ** (snr_db / 10.0)))
    return s + c * v
