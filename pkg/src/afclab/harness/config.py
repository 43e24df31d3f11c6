"""Scenario configuration: defaults, validation, file loading and hashing."""

import dataclasses
import hashlib
import json
from dataclasses import dataclass

import yaml

from ..forward_paths import ForwardPathSpec

MODES = ("offline", "recursive")
INPUTS = ("ar", "wav")
FORWARD_KINDS = ("fir", "iir_ap", "delay", "delay1", "delay2")


@dataclass(frozen=True)
class ScenarioConfig:
    """
    One closed-loop identification experiment.

    ``seed`` is the replicate id: it selects the feedback path and offsets the
    forward-path draw, so replicates are independent experiments. ``L_B`` is
    derived from ``L_A`` and ``L_F_hat``. ``remove_dc=None`` means on for the
    recursive mode and off for the offline mode.
    """

    sample_rate: int = 16000
    duration: float = 45.0
    L_F: int = 64
    L_F_hat: int = 64
    L_D: int = 10
    L_A: int = 10
    forward_kind: str = "delay2"
    L_GN: int = 15
    alpha: int = 1
    forward_seed: int = 0
    margin_db: float = 3.0
    mode: str = "offline"
    input: str = "ar"
    wav_path: str = None
    input_rms: float = 0.05
    ar_seed: int = 1000
    input_seed: int = 2000
    snr_db: float = None
    noise_seed: int = 3000
    seed: int = 0
    decay_tau: float = 10.0
    feedback_path_file: str = None
    remove_dc: bool = None
    grid_points: int = 4096
    kappa_threshold: float = 1e8
    coeff_clip: float = 10.0
    amp_clip: float = 1.0
    warmup: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.input not in INPUTS:
            raise ValueError(f"input must be one of {INPUTS}")
        if self.input == "wav" and not self.wav_path:
            raise ValueError("input 'wav' requires wav_path")
        if self.forward_kind not in FORWARD_KINDS:
            raise ValueError(f"forward_kind must be one of {FORWARD_KINDS}")
        if self.sample_rate <= 0 or self.duration <= 0:
            raise ValueError("sample_rate and duration must be positive")
        if self.L_A < self.L_D:
            raise ValueError(f"need L_A >= L_D, got L_A={self.L_A}, L_D={self.L_D}")
        if self.L_F_hat < self.L_F:
            raise ValueError(f"need L_F_hat >= L_F, got L_F_hat={self.L_F_hat}, L_F={self.L_F}")
        self.forward_spec()

    @property
    def L_B(self):
        return self.L_A + self.L_F_hat - 1

    @property
    def n_samples(self):
        return int(round(self.duration * self.sample_rate))

    @property
    def dc_removal(self):
        return self.mode == "recursive" if self.remove_dc is None else self.remove_dc

    def forward_spec(self):
        """Resolve the forward-path aliases into a ``ForwardPathSpec``."""
        kind, alpha, L_GN = self.forward_kind, self.alpha, self.L_GN
        if kind == "delay1":
            kind, alpha = "delay", self.L_A
        elif kind == "delay2":
            kind, alpha = "delay", self.L_GN - 1
        return ForwardPathSpec(kind=kind, L_GN=L_GN, alpha=alpha, seed=self.forward_seed + self.seed)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}


def coerce(name, value):
    """Convert a textual override to the type of the matching config field."""
    if name not in FIELDS:
        raise KeyError(f"unknown scenario field {name!r}")
    if value is None or not isinstance(value, str):
        return value
    default = FIELDS[name].default
    if isinstance(default, bool) or name == "remove_dc":
        low = value.lower()
        if low in ("none", "auto"):
            return None
        return low in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float) or name == "snr_db":
        return None if value.lower() == "none" else float(value)
    return value


def load_config(path=None, **overrides):
    """
    Build a ``ScenarioConfig`` from a YAML/JSON mapping plus keyword overrides.

    Overrides whose value is ``None`` are ignored.
    """
    data = {}
    if path:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: expected a mapping of scenario fields")
        unknown = set(data) - set(FIELDS)
        if unknown:
            raise ValueError(f"{path}: unknown fields {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ScenarioConfig(**{k: coerce(k, v) for k, v in data.items()})
