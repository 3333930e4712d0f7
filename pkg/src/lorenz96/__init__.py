"""Lorenz-96 model with diffusion: analytic bifurcation theory and numerical diagnostics."""
from .errors import (
    DegenerateError,
    DivergenceError,
    ExcludedParameterError,
    InvalidArgumentError,
    Lorenz96Error,
    NoCrossingError,
    NoCycleError,
    NotPeriodicError,
    NoTrappingError,
    PreOnsetError,
    UndefinedWaveError,
    UnsupportedDimensionError,
)
from .model import SystemConfig, energy, equilibrium, jacobian, trapping_radius, vector_field

__version__ = "0.1.0"

__all__ = [
    "SystemConfig",
    "vector_field",
    "jacobian",
    "equilibrium",
    "energy",
    "trapping_radius",
    "Lorenz96Error",
    "InvalidArgumentError",
    "UnsupportedDimensionError",
    "NoCrossingError",
    "ExcludedParameterError",
    "NoTrappingError",
    "DegenerateError",
    "DivergenceError",
    "NoCycleError",
    "NotPeriodicError",
    "PreOnsetError",
    "UndefinedWaveError",
]
