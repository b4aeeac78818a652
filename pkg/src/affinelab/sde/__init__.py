"""Pathwise simulation engine for affine jump-diffusions."""

from ._model import ExplosionError, SchemeSettings, StepModel
from .backend import active_backend_name, compiled_available, get_backend
from .engine import (
    EnsembleResult,
    NoiseBundle,
    Trajectory,
    read_samples,
    simulate,
    simulate_coupled,
    simulate_ensemble,
    trajectory_to_csv,
    write_samples,
)

__all__ = [
    "ExplosionError",
    "SchemeSettings",
    "StepModel",
    "NoiseBundle",
    "Trajectory",
    "EnsembleResult",
    "simulate",
    "simulate_coupled",
    "simulate_ensemble",
    "trajectory_to_csv",
    "write_samples",
    "read_samples",
    "get_backend",
    "active_backend_name",
    "compiled_available",
]
