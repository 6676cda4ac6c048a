"""Stationary measures of open ASEP and open KPZ: exact constructions and scaling-limit checks."""

__version__ = "0.1.0"

from .errors import (CapacityError, DivergenceError, DomainError, FanRegionError, OklError,
                     SingularityError, TruncationError, UnreliableEstimateError)
from .params import AbcdParams, AsepParams, BoundaryDensities, ScalingSpec, kappa_pm, q_bracket, scaling_to_asep
from .stats import EmpiricalSample, FiniteLaw, ks_distance, total_variation

__all__ = [
    "__version__", "AbcdParams", "AsepParams", "BoundaryDensities", "ScalingSpec", "kappa_pm",
    "q_bracket", "scaling_to_asep", "EmpiricalSample", "FiniteLaw", "ks_distance", "total_variation",
    "OklError", "DomainError", "FanRegionError", "CapacityError", "SingularityError",
    "DivergenceError", "TruncationError", "UnreliableEstimateError",
]
