"""Autonomous ODE systems ``u' = L(u)`` and the derivative quantities the
two-derivative schemes need.

Besides ``L`` and its Jacobian ``L_u`` the schemes use the time derivative of
the right-hand side along the flow, ``G(u) = L_u(u) L(u)``, and inside the
Newton iterations its Jacobian ``G_u = L_uu L + L_u^2``. ``L_uu L`` is supplied
by ``second_contraction(u, w)``, the matrix ``M_ij = sum_k d2L_i/du_j du_k w_k``.
Systems without it fall back to forward differences of ``G``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from stiffstep.errors import DomainError
from stiffstep.linalg import DOUBLE, Precision, all_finite

DEFAULT_FD_STEP = float(np.sqrt(np.finfo(np.float64).eps))


@dataclass(frozen=True)
class OdeSystem:
    dim: int
    rhs: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]
    second_contraction: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    precision: Precision = DOUBLE
    fd_step: float = DEFAULT_FD_STEP
    name: str = "ode"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")


class Derivatives(NamedTuple):
    rhs: np.ndarray
    jac: np.ndarray
    g: np.ndarray
    g_jac: np.ndarray


def _check(values, what: str):
    if not all_finite(values):
        raise DomainError(f"non-finite value in {what}")
    return values


def temporal_derivative(sys: OdeSystem, u: np.ndarray) -> np.ndarray:
    """``G(u) = L_u(u) L(u)``, the time derivative of ``L`` along the flow."""
    return _check(sys.jac(u) @ sys.rhs(u), "temporal derivative")


def _fd_g_jac(sys: OdeSystem, u: np.ndarray, fd_step: float, g0: np.ndarray) -> np.ndarray:
    n = sys.dim
    cols = []
    for j in range(n):
        h = fd_step * (1 + abs(u[j]))
        up = u.copy()
        up[j] = up[j] + h
        # the step actually taken, after rounding of u_j + h
        h_eff = up[j] - u[j]
        cols.append((temporal_derivative(sys, up) - g0) / h_eff)
    return np.stack(cols, axis=1)


def temporal_derivative_jacobian(sys: OdeSystem, u: np.ndarray, fd_step: float | None = None) -> np.ndarray:
    """``G_u(u)``: analytic when ``second_contraction`` exists, else forward differences.

    The finite-difference step for column ``j`` is ``fd_step * (1 + |u_j|)``.
    """
    if sys.second_contraction is not None:
        f = sys.rhs(u)
        J = sys.jac(u)
        return _check(sys.second_contraction(u, f) + J @ J, "temporal derivative Jacobian")
    step = sys.fd_step if fd_step is None else fd_step
    return _check(_fd_g_jac(sys, u, step, temporal_derivative(sys, u)), "temporal derivative Jacobian")


def derivatives(sys: OdeSystem, u: np.ndarray) -> Derivatives:
    """Everything a Newton iteration needs at ``u``, with one rhs/jac evaluation."""
    f = sys.rhs(u)
    J = sys.jac(u)
    g = J @ f
    if sys.second_contraction is not None:
        gj = sys.second_contraction(u, f) + J @ J
    else:
        gj = _fd_g_jac(sys, u, sys.fd_step, g)
    if not (all_finite(f) and all_finite(g) and all_finite(gj) and all_finite(J)):
        raise DomainError("non-finite derivative evaluation")
    return Derivatives(f, J, g, gj)


def jacobian_fd_error(sys: OdeSystem, u: np.ndarray, h: float = 1e-6) -> float:
    """Max relative mismatch between ``jac`` and central differences of ``rhs``."""
    J = np.asarray(sys.jac(u), dtype=float)
    u = np.asarray(u, dtype=float)
    cols = []
    for j in range(sys.dim):
        hj = h * (1 + abs(u[j]))
        e = np.zeros_like(u)
        e[j] = hj
        cols.append((np.asarray(sys.rhs(u + e), dtype=float) - np.asarray(sys.rhs(u - e), dtype=float)) / (2 * hj))
    fd = np.stack(cols, axis=1)
    return float(np.max(np.abs(fd - J)) / max(np.max(np.abs(J)), 1e-300))


def g_jacobian_fd_error(sys: OdeSystem, u: np.ndarray, h: float = 1e-6) -> float:
    """Max relative mismatch between ``G_u`` and central differences of ``G``."""
    gj = np.asarray(temporal_derivative_jacobian(sys, u), dtype=float)
    u = np.asarray(u, dtype=float)
    cols = []
    for j in range(sys.dim):
        hj = h * (1 + abs(u[j]))
        e = np.zeros_like(u)
        e[j] = hj
        gp = np.asarray(temporal_derivative(sys, u + e), dtype=float)
        gm = np.asarray(temporal_derivative(sys, u - e), dtype=float)
        cols.append((gp - gm) / (2 * hj))
    fd = np.stack(cols, axis=1)
    return float(np.max(np.abs(fd - gj)) / max(np.max(np.abs(gj)), 1e-300))


def linear_system(A, b=None, precision: Precision = DOUBLE, name: str = "linear") -> OdeSystem:
    """``L(u) = A u + b``; also serves complex ``A`` for the scalar test equation."""
    A = np.asarray(A)
    n = A.shape[0]
    b = np.zeros(n, dtype=A.dtype) if b is None else np.asarray(b)
    zero = np.zeros((n, n), dtype=A.dtype)
    return OdeSystem(
        dim=n,
        rhs=lambda u: A @ u + b,
        jac=lambda u: A,
        second_contraction=lambda u, w: zero,
        precision=precision,
        name=name,
    )
