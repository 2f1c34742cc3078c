"""Inertial motion transformer: velocity-segment regression from IMU windows.

The package covers the full desk-scale pipeline: synthetic data with exact
ground truth, the variate-token transformer with trend/seasonal decoupling
and query motion particles, classical SINS/PDR baselines, trajectory-error
metrics, and a training/evaluation harness behind one CLI.
"""

from .config import ConfigError, RunConfig, config_from_json, config_to_json, validate_config
from .datasets import (
    DatasetError,
    ImuSequence,
    MotionProfile,
    NoiseSpec,
    generate_dataset,
    generate_sequence,
    load_dataset,
    window_dataset,
    window_sequence,
)
from .decompose import centered_moving_average, decompose_window, series_break
from .estimator import MotionTransformerRegressor
from .metrics import ate, d_rte, pde, t_rte, trajectory_metrics
from .model import MotionTransformer
from .odometry import integrate_velocities, pdr_reconstruct, sins_reconstruct
from .types import GRAVITY, ImuWindow, ParticleSet, Trajectory, VariateTokens
from .training import TrainingDiverged, evaluate_run, fit_model, train_run

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DatasetError",
    "GRAVITY",
    "ImuSequence",
    "ImuWindow",
    "MotionProfile",
    "MotionTransformer",
    "MotionTransformerRegressor",
    "NoiseSpec",
    "ParticleSet",
    "RunConfig",
    "Trajectory",
    "TrainingDiverged",
    "VariateTokens",
    "ate",
    "centered_moving_average",
    "config_from_json",
    "config_to_json",
    "d_rte",
    "decompose_window",
    "evaluate_run",
    "fit_model",
    "generate_dataset",
    "generate_sequence",
    "integrate_velocities",
    "load_dataset",
    "pde",
    "pdr_reconstruct",
    "series_break",
    "sins_reconstruct",
    "t_rte",
    "train_run",
    "trajectory_metrics",
    "validate_config",
    "window_dataset",
    "window_sequence",
]
