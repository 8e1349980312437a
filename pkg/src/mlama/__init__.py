"""Mismatched-prior AMP detectors for massive MU-MIMO and their state evolution."""

from .amp import AmpResult, AmpState, DetectorConfig, detect
from .baselines import box_detect, fm_minimize, lmmse_detect, mf_detect, zf_detect
from .channel import MimoInstance, draw_channel, draw_instance, snr_to_n0, transmit, trial_rng
from .constellation import Constellation, from_key, make_constellation
from .denoisers import FAMILIES, Denoiser, make_denoiser
from .estimators import AmpDetector, BoxDetector, LinearDetector
from .exceptions import AnalysisError, ConfigurationError, DetectorError, DomainError, MlamaError
from .se import SeTrajectory, fixed_point, mrt, psi_mm, se_trajectory, ser_predict
from .harness import SweepConfig, run_sweep
from .tuning import TuningPolicy, parse_policy, tune_tau

__version__ = "0.1.0"

__all__ = [
    "FAMILIES",
    "AmpDetector",
    "AmpResult",
    "AmpState",
    "AnalysisError",
    "BoxDetector",
    "ConfigurationError",
    "Constellation",
    "Denoiser",
    "DetectorConfig",
    "DetectorError",
    "DomainError",
    "LinearDetector",
    "MimoInstance",
    "MlamaError",
    "SeTrajectory",
    "SweepConfig",
    "TuningPolicy",
    "box_detect",
    "detect",
    "draw_channel",
    "draw_instance",
    "fixed_point",
    "fm_minimize",
    "from_key",
    "lmmse_detect",
    "make_constellation",
    "make_denoiser",
    "mf_detect",
    "mrt",
    "parse_policy",
    "psi_mm",
    "run_sweep",
    "se_trajectory",
    "ser_predict",
    "snr_to_n0",
    "transmit",
    "trial_rng",
    "tune_tau",
    "zf_detect",
]
