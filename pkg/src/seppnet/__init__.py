"""Saturated self-exciting Poisson point processes on networks.

Simulation, regularized maximum-likelihood network estimation, and
closed-form error-bound calculators for count time series driven by
clipped (saturated) self-excitation.
"""

from seppnet.model import (
    BasisSet,
    Bounds,
    CountMatrix,
    DimensionError,
    InfluenceModel,
    InputFormatError,
    NumericError,
    ParameterError,
    Saturation,
    feature_matrix,
    features_update,
    nll,
    rate_bounds,
    rates,
)
from seppnet.simulate import DesignSpec, clip_rate, make_design, simulate
from seppnet.solver import FitConfig, FitResult, RegularizerSpec, fit, fit_diagonal, project_feasible, prox

__all__ = [
    "BasisSet",
    "Bounds",
    "CountMatrix",
    "DesignSpec",
    "DimensionError",
    "FitConfig",
    "FitResult",
    "InfluenceModel",
    "InputFormatError",
    "NumericError",
    "ParameterError",
    "RegularizerSpec",
    "Saturation",
    "clip_rate",
    "feature_matrix",
    "features_update",
    "fit",
    "fit_diagonal",
    "make_design",
    "nll",
    "project_feasible",
    "prox",
    "rate_bounds",
    "rates",
    "simulate",
]

__version__ = "0.1.0"
