"""Response-operator closures for the two-scale Lorenz 96 model."""
from ._jit import BACKEND
from .calibrate import (CalibrationData, calibrate_operators, calibrate_rescaling,
                        compute_reference, compute_response_operators, predict_fast_stats)
from .closure import ClosureKind, ClosureSystem, reduced_rhs, zero_order_rhs
from .errors import FdtClosureError
from .integrate import FastLimitingSystem, FullSystem, IntegrationPlan, rk4_step
from .model import ModelParams, SystemState, coupling_fields, full_rhs
from .stats import l2_distance, slow_statistics

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CalibrationData", "ClosureKind", "ClosureSystem", "FastLimitingSystem",
    "FdtClosureError", "FullSystem", "IntegrationPlan", "ModelParams", "SystemState",
    "calibrate_operators", "calibrate_rescaling", "compute_reference",
    "compute_response_operators", "coupling_fields", "full_rhs", "l2_distance",
    "predict_fast_stats", "reduced_rhs", "rk4_step", "slow_statistics", "zero_order_rhs",
]
