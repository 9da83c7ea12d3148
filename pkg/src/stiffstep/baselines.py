"""Comparator integrators and the fixed-step driver.

``step_rk4_explicit`` is the classical four-stage method (also the reference
solution generator). ``step_irk4_gauss`` is the two-stage Gauss-Legendre
collocation method, fourth order and A-stable, with the 2n stacked stage
equations solved by full Newton.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from stiffstep.errors import DomainError, NewtonDiverged, StiffStepError
from stiffstep.linalg import Precision, all_finite, lu_solve, norm_linf
from stiffstep.model import OdeSystem
from stiffstep.tsfo import DIVERGENCE_GROWTH, NewtonConfig, StepStats, _dt, converged


@dataclass(frozen=True)
class ButcherTableau:
    a: tuple[tuple[float, ...], ...]
    b: tuple[float, ...]
    c: tuple[float, ...]

    @property
    def stage_count(self) -> int:
        return len(self.b)

    def __post_init__(self):
        s = len(self.b)
        if len(self.c) != s or len(self.a) != s or any(len(r) != s for r in self.a):
            raise ValueError("inconsistent tableau dimensions")
        if abs(sum(self.b) - 1) > 1e-14:
            raise ValueError("weights must sum to one")
        for ci, row in zip(self.c, self.a):
            if abs(sum(row) - ci) > 1e-14:
                raise ValueError("row sums of a must equal c")


RK4_TABLEAU = ButcherTableau(
    a=((0.0, 0.0, 0.0, 0.0), (0.5, 0.0, 0.0, 0.0), (0.0, 0.5, 0.0, 0.0), (0.0, 0.0, 1.0, 0.0)),
    b=(1 / 6, 1 / 3, 1 / 3, 1 / 6),
    c=(0.0, 0.5, 0.5, 1.0),
)

_S3 = math.sqrt(3)
GAUSS2_TABLEAU = ButcherTableau(
    a=((0.25, 0.25 - _S3 / 6), (0.25 + _S3 / 6, 0.25)),
    b=(0.5, 0.5),
    c=(0.5 - _S3 / 6, 0.5 + _S3 / 6),
)


def _gauss2_coefficients(p: Precision):
    s3 = p.sqrt(p.scalar(3))
    q = p.scalar(1) / 4
    return ((q, q - s3 / 6), (q + s3 / 6, q)), (p.scalar(1) / 2, p.scalar(1) / 2)


def step_rk4_explicit(sys: OdeSystem, u_n: np.ndarray, dt) -> np.ndarray:
    if dt < 0:
        raise ValueError("dt must be non-negative")
    dt = _dt(sys, dt)
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = sys.rhs(u_n)
        k2 = sys.rhs(u_n + (dt / 2) * k1)
        k3 = sys.rhs(u_n + (dt / 2) * k2)
        k4 = sys.rhs(u_n + dt * k3)
        out = u_n + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not all_finite(out):
        raise DomainError("explicit RK4 step overflowed")
    return out


def step_irk4_gauss(sys: OdeSystem, u_n: np.ndarray, dt, cfg: NewtonConfig = NewtonConfig()):
    """One Gauss-Legendre step; returns ``(u_next, iters)``.

    Unknowns are the stage slopes ``K = (k1, k2)`` with
    ``k_i = L(u_n + dt sum_j a_ij k_j)``; Newton matrix blocks are
    ``delta_ij I - dt a_ij L_u(Y_j)``. Initial slopes are ``L(u_n)``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    dt = _dt(sys, dt)
    a, b = _gauss2_coefficients(sys.precision)
    n = sys.dim
    f0 = sys.rhs(u_n)
    K = [f0.copy(), f0.copy()]
    dtype = f0.dtype
    eye = np.eye(n, dtype=dtype if dtype != object else object)
    first = prev = None
    for k in range(cfg.max_iter):
        Y = [u_n + dt * (a[i][0] * K[0] + a[i][1] * K[1]) for i in range(2)]
        F = np.concatenate([K[i] - sys.rhs(Y[i]) for i in range(2)])
        Js = [sys.jac(Y[j]) for j in range(2)]
        blocks = [[(eye if i == j else 0 * eye) - (dt * a[i][j]) * Js[i] for j in range(2)] for i in range(2)]
        M = np.block(blocks)
        try:
            delta = lu_solve(M, -F)
        except StiffStepError as exc:
            exc.stage = 0
            raise
        K = [K[0] + delta[:n], K[1] + delta[n:]]
        if not (all_finite(K[0]) and all_finite(K[1])):
            raise DomainError("non-finite Gauss-Legendre stage")
        nrm = norm_linf(delta) * abs(dt)
        if first is None:
            first = nrm
        elif nrm > DIVERGENCE_GROWTH * first and nrm > cfg.atol:
            raise NewtonDiverged("Gauss-Legendre Newton update grew")
        if converged(nrm, prev, cfg.atol + cfg.rtol * norm_linf(u_n)):
            return u_n + dt * (b[0] * K[0] + b[1] * K[1]), k
        prev = nrm
    raise NewtonDiverged(f"Gauss-Legendre stages did not converge in {cfg.max_iter} iterations")


Stepper = Callable[[OdeSystem, np.ndarray, object], object]


def integrate_fixed(
    sys: OdeSystem,
    u0: np.ndarray,
    t_end,
    n_steps: int,
    stepper: Stepper,
    iterations: list | None = None,
    on_step: Callable[[int, np.ndarray], None] | None = None,
) -> np.ndarray:
    """Apply ``stepper`` exactly ``n_steps`` times with ``dt = t_end / n_steps``.

    The stepper may return the new state or ``(state, stats)``; in the latter
    case per-step Newton iteration counts are appended to ``iterations``.
    Errors are re-raised with ``step_index`` set.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    p = sys.precision
    dt = (p.scalar(t_end) if isinstance(t_end, (float, int, str)) else t_end) / n_steps
    u = u0
    for i in range(n_steps):
        try:
            out = stepper(sys, u, dt)
        except StiffStepError as exc:
            exc.step_index = i
            raise
        if isinstance(out, tuple):
            u, info = out
            if iterations is not None:
                iterations.append(info.total_iters if isinstance(info, StepStats) else int(info))
        else:
            u = out
            if iterations is not None:
                iterations.append(0)
        if on_step is not None:
            on_step(i + 1, u)
    return u


def rk4_compensated(sys: OdeSystem, u0: np.ndarray, dt, n_steps: int) -> np.ndarray:
    """Classical RK4 with Kahan-compensated accumulation of the state.

    Used for long reference runs where ``n_steps`` reaches 1e7 or more and
    plain summation would leave a rounding floor of ~1e-13.
    """
    dt = _dt(sys, dt)
    u = u0.copy()
    comp = np.zeros_like(u)
    half = dt / 2
    sixth = dt / 6
    for i in range(n_steps):
        k1 = sys.rhs(u)
        k2 = sys.rhs(u + half * k1)
        k3 = sys.rhs(u + half * k2)
        k4 = sys.rhs(u + dt * k3)
        y = sixth * (k1 + 2 * k2 + 2 * k3 + k4) - comp
        t = u + y
        comp = (t - u) - y
        u = t
        if not all_finite(u):
            raise DomainError("reference RK4 run overflowed", step_index=i)
    return u


def explicit_amplification(z: complex) -> complex:
    """Scalar-linear growth factor shared by explicit RK4 and explicit TSFO."""
    return 1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24


def gauss2_amplification(z: complex) -> complex:
    """The (2,2) Pade approximant of exp(z)."""
    return (1 + z / 2 + z**2 / 12) / (1 - z / 2 + z**2 / 12)
