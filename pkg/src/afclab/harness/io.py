"""File formats: 16-bit PCM WAV input, plain-text coefficient files."""

import wave
from dataclasses import dataclass

import numpy as np

from ..signals import as_coeffs

FULL_SCALE = 32768.0


@dataclass
class Signal:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("signal contains non-finite samples")

    def __len__(self):
        return len(self.samples)


def load_wav(path, expected_rate=16000):
    """Read a mono 16-bit PCM WAV file, scaling samples to [-1, 1)."""
    with wave.open(str(path), "rb") as wf:
        channels, width, rate = wf.getnchannels(), wf.getsampwidth(), wf.getframerate()
        if wf.getcomptype() != "NONE":
            raise ValueError(f"{path}: compressed WAV ({wf.getcomptype()}) is not supported")
        if channels != 1:
            raise ValueError(f"{path}: expected mono audio, found {channels} channels")
        if width != 2:
            raise ValueError(f"{path}: expected 16-bit samples, found {8 * width}-bit")
        if expected_rate is not None and rate != expected_rate:
            raise ValueError(f"{path}: sample rate {rate} Hz found, {expected_rate} Hz expected (no resampling)")
        raw = wf.readframes(wf.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(float) / FULL_SCALE
    return Signal(samples, rate)


def write_wav(path, samples, sample_rate=16000):
    """Write samples in [-1, 1) as mono 16-bit PCM (rounded, saturated)."""
    q = np.clip(np.round(np.asarray(samples, dtype=float) * FULL_SCALE), -32768, 32767)
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(q.astype("<i2").tobytes())


def save_coefficients(path, taps):
    np.savetxt(path, as_coeffs(taps), fmt="%.17g")


def load_coefficients(path):
    return as_coeffs(np.loadtxt(path, ndmin=1), f"coefficients in {path}")
