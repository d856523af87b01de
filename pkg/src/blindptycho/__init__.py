"""Blind ptychography: specimen and mask recovery from far-field spectrograms."""

from .angular_sync import BandedDiagonals, angular_sync, rank_one_sync
from .blind_deconv import LiftedModel, SolverConfig, SolverState, solve, spectral_init
from .blind_ptycho import (
    BlindScene,
    ShiftEstimates,
    random_blind_scene,
    recover_mask,
    recover_multi_shift,
    recover_specimen_zero_shift,
    relative_error,
)
from .errors import (
    AliasingError,
    BlindPtychoError,
    ConfigError,
    DegenerateEstimateError,
    DivergenceError,
    DivisionError,
    IllConditionedMaskError,
    SolverError,
    SyncError,
)
from .experiment import ExperimentConfig, run_sweep, run_wdd_demo, validate_config
from .measurement import MeasurementMatrix, PtychoScene, add_noise, forward_full, random_scene
from .wdd import wdd_recover

__version__ = "0.1.0"

__all__ = [
    "AliasingError",
    "BandedDiagonals",
    "BlindPtychoError",
    "BlindScene",
    "ConfigError",
    "DegenerateEstimateError",
    "DivergenceError",
    "DivisionError",
    "ExperimentConfig",
    "IllConditionedMaskError",
    "LiftedModel",
    "MeasurementMatrix",
    "PtychoScene",
    "ShiftEstimates",
    "SolverConfig",
    "SolverError",
    "SolverState",
    "SyncError",
    "add_noise",
    "angular_sync",
    "forward_full",
    "random_blind_scene",
    "random_scene",
    "rank_one_sync",
    "recover_mask",
    "recover_multi_shift",
    "recover_specimen_zero_shift",
    "relative_error",
    "run_sweep",
    "run_wdd_demo",
    "solve",
    "spectral_init",
    "validate_config",
    "wdd_recover",
]
