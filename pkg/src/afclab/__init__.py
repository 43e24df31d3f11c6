"""Closed-loop acoustic feedback simulation and 2ch-AFC identifiability experiments."""

from .afc import (
    AfcSolution,
    CorrelationSystem,
    RlsState,
    build_normal_equations,
    condition_number,
    prediction_error,
    recover_feedback,
    rls_init,
    rls_update,
    solve_batch,
)
from .closed_loop import RlsController, Safeguards, SimulationError, simulate
from .forward_paths import ForwardPathSpec, calibrate_gain, make_delay, make_fir_forward, make_iir_allpass
from .metrics import FrequencyGrid, MetricsReport, asg, freq_response, misalignment, msg
from .signals import RationalFilter, ar_generate, fir_filter, iir_filter, lpc, mix_at_snr, white_noise

__version__ = "0.1.0"
