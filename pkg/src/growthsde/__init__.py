"""Stochastic Gompertz and logistic growth models and their diagnostics."""

from .core import (
    AnalyticLaw,
    DensityCurve,
    EmptyEnsembleError,
    GrowthSdeError,
    PathEnsemble,
    TimeGrid,
    WienerConfig,
    euler_maruyama,
    ks_distance,
    sample_wiener,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticLaw",
    "DensityCurve",
    "EmptyEnsembleError",
    "GrowthSdeError",
    "PathEnsemble",
    "TimeGrid",
    "WienerConfig",
    "euler_maruyama",
    "ks_distance",
    "sample_wiener",
]
