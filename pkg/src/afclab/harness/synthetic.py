"""Synthetic stand-ins for measured feedback paths and speech-shaped input."""

import numpy as np

from ..metrics import DEFAULT_GRID, freq_response
from ..signals import ar_generate, check_ar_model, levinson, white_noise


def make_feedback_path(L_F, seed, decay_tau=10.0, remove_dc=True, grid=DEFAULT_GRID):
    """
    Exponentially decaying random FIR feedback path with peak magnitude 1.

    Taps are ``x_i * exp(-i / decay_tau)`` with standard-normal ``x_i``. With
    ``remove_dc`` the tap mean is removed before normalization so that the
    path, like a real acoustic path, has no DC response.
    """
    if L_F < 1:
        raise ValueError("L_F must be >= 1")
    if decay_tau <= 0:
        raise ValueError("decay_tau must be positive")
    x = np.random.default_rng(seed).standard_normal(L_F)
    f = x * np.exp(-np.arange(L_F) / decay_tau)
    if remove_dc and L_F > 1:
        f -= f.mean()
    peak = np.max(np.abs(freq_response(f, grid)))
    return f / peak


def speech_spectrum_db(freqs, seed, knee_hz=500.0, slope_db=9.0, ripple_db=4.0, n_bumps=4):
    """
    Long-term speech-like power spectrum in dB at ``freqs`` (Hz).

    Flat between 100 Hz and ``knee_hz``, falling ``slope_db`` per octave above
    the knee and 12 dB per octave below 100 Hz, with ``n_bumps`` random
    Gaussian ripples of up to +-``ripple_db`` that differ per seed.
    """
    rng = np.random.default_rng(seed)
    freqs = np.asarray(freqs, dtype=float)
    db = -slope_db * np.log2(np.maximum(freqs, knee_hz) / knee_hz)
    db -= 12.0 * np.log2(np.maximum(100.0 / np.maximum(freqs, 1.0), 1.0))
    for _ in range(n_bumps):
        centre = rng.uniform(200.0, 5000.0)
        width = rng.uniform(150.0, 800.0)
        height = rng.uniform(-ripple_db, ripple_db)
        db += height * np.exp(-0.5 * ((freqs - centre) / width) ** 2)
    return db


def make_ar_model(L_D, seed, sample_rate=16000, nfft=4096, **shape):
    """
    Speech-shaped AR polynomial d of length ``L_D`` (``d[0] == 1``).

    LPC of order ``L_D - 1`` fitted (Levinson-Durbin) to the autocorrelation
    of ``speech_spectrum_db``; keyword arguments are passed to that function.
    """
    if L_D < 1:
        raise ValueError("L_D must be >= 1")
    freqs = np.linspace(0.0, sample_rate / 2.0, nfft // 2 + 1)
    psd = 10.0 ** (speech_spectrum_db(freqs, seed, **shape) / 10.0)
    r = np.fft.irfft(psd)[:L_D]
    d, _, _ = levinson(r, L_D - 1)
    return check_ar_model(d)


def speech_shaped_noise(d, n, seed, rms=None):
    """AR(d) noise of ``n`` samples, optionally scaled to a target RMS."""
    s = ar_generate(d, white_noise(n, seed))
    if rms is not None and n:
        s *= rms / np.sqrt(np.mean(s * s))
    return s
