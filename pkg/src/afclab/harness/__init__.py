from .config import ScenarioConfig, load_config
from .io import Signal, load_coefficients, load_wav, save_coefficients, write_wav
from .scenario import execute_scenario, identifiable, probe, run_scenario
from .synthetic import make_ar_model, make_feedback_path, speech_shaped_noise
from .sweep import SweepResult, SweepRow, sweep
