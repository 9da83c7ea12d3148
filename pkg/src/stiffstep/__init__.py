"""Two-stage fourth-order implicit time integration for stiff ODEs.

The implicit scheme advances ``u' = L(u)`` using both ``L`` and its time
derivative ``G = L_u L``; each stage is a nonlinear system solved by Newton.
"""

from stiffstep.errors import (
    CacheCorrupt,
    DomainError,
    NewtonDiverged,
    PoleEvaluation,
    SingularMatrix,
    StiffStepError,
)
from stiffstep.linalg import DOUBLE, LONGDOUBLE, Precision, get_precision, mp_precision
from stiffstep.model import OdeSystem, linear_system
from stiffstep.order_conditions import DEFAULT_C, SchemeParams
from stiffstep.tsfo import NewtonConfig, step_explicit_tsfo, step_implicit_tsfo

__all__ = [
    "CacheCorrupt",
    "DEFAULT_C",
    "DOUBLE",
    "DomainError",
    "LONGDOUBLE",
    "NewtonConfig",
    "NewtonDiverged",
    "OdeSystem",
    "PoleEvaluation",
    "Precision",
    "SchemeParams",
    "SingularMatrix",
    "StiffStepError",
    "get_precision",
    "linear_system",
    "mp_precision",
    "step_explicit_tsfo",
    "step_implicit_tsfo",
]
