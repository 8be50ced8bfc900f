"""Pseudo-spectral laboratory for u_t = i Lap u + lam |u|^alpha u with
dissipative, mass-subcritical nonlinearity, and its pseudo-conformal image."""

from .integrator import AUTONOMOUS, NONAUTONOMOUS, IntegrationError, StepPlan, Trajectory, run
from .params import IndexSet, ModelParams, sigma_schedule, thresholds, validate_indices
from .profile import build_profiles, l2_rate_check, magnitude_identity_residual, profile_error, sup_limit_check
from .spectral import Field, Grid, field_from_function, resample
from .transform import equivalence_test, u_to_v, v_to_u

__all__ = [
    "AUTONOMOUS",
    "NONAUTONOMOUS",
    "Field",
    "Grid",
    "IndexSet",
    "IntegrationError",
    "ModelParams",
    "StepPlan",
    "Trajectory",
    "build_profiles",
    "equivalence_test",
    "field_from_function",
    "l2_rate_check",
    "magnitude_identity_residual",
    "profile_error",
    "resample",
    "run",
    "sigma_schedule",
    "sup_limit_check",
    "thresholds",
    "u_to_v",
    "v_to_u",
    "validate_indices",
]

__version__ = "0.1.0"
