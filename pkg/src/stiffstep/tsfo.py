"""Two-stage fourth-order steppers: the implicit scheme solved by Newton's
method, and its explicit counterpart that also supplies the initial guesses.

Both stages of the implicit step are solved with full Newton: the Jacobian
and its LU factors are rebuilt at every iteration. Stage 1 solves

    F1(x) = u_n + dt (a1 L_n + a2 L(x)) + dt^2 (b1 G_n + b2 G(x)) - x = 0,
    J1(x) = dt a2 L_u(x) + dt^2 b2 G_u(x) - I,

and stage 2 the analogous system with (a3..a5, b3..b5). With D = -C these
reduce to J1 = dt/4 L_u - dt^2/48 G_u - I and
J2 = dt (1/6 + 13C/2) L_u - (3C/2) dt^2 G_u - I.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from stiffstep.errors import DomainError, NewtonDiverged, StiffStepError
from stiffstep.linalg import all_finite, lu_solve, norm_linf
from stiffstep.model import OdeSystem, derivatives, temporal_derivative
from stiffstep.order_conditions import SchemeParams, scheme_coefficients, solve_stage1

log = logging.getLogger(__name__)

DIVERGENCE_GROWTH = 1e4


@dataclass(frozen=True)
class NewtonConfig:
    """Stopping rule: ``||du||_inf < atol + rtol * ||u_k||_inf``.

    ``restart_from_previous`` retries a stage from ``u_n`` when Newton fails
    from the explicit predictor.
    """

    atol: float = 1e-14
    rtol: float = 1e-14
    max_iter: int = 50
    restart_from_previous: bool = True

    def __post_init__(self):
        if not self.atol > 0:
            raise ValueError("atol must be positive")
        if not self.rtol >= 0:
            raise ValueError("rtol must be non-negative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class StepStats:
    stage1_iters: int
    stage2_iters: int
    final_update_norm_stage1: float
    final_update_norm_stage2: float
    restarted: bool = False

    @property
    def total_iters(self) -> int:
        return self.stage1_iters + self.stage2_iters


def _finite(x, what: str, stage: int | None = None):
    if not all_finite(x):
        raise DomainError(f"non-finite {what}", stage=stage)
    return x


def _dt(sys: OdeSystem, dt):
    if isinstance(dt, float) and sys.precision.dtype is not np.float64:
        return sys.precision.scalar(dt)
    return dt


def predict_stage1(sys: OdeSystem, u_n: np.ndarray, dt) -> np.ndarray:
    """Explicit half step ``u_n + dt/2 L(u_n) + dt^2/8 G(u_n)``."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    dt = _dt(sys, dt)
    p = sys.precision
    out = u_n + (dt * p.scalar(0.5)) * sys.rhs(u_n) + (dt * dt * p.scalar(0.125)) * temporal_derivative(sys, u_n)
    return _finite(out, "stage-1 predictor", stage=1)


def predict_stage2(sys: OdeSystem, u_n: np.ndarray, u_half: np.ndarray, dt) -> np.ndarray:
    """Explicit full step ``u_n + dt L(u_n) + dt^2/6 [G(u_n) + 2 G(u_half)]``."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    dt = _dt(sys, dt)
    sixth = sys.precision.scalar(1) / 6
    g = temporal_derivative(sys, u_n) + 2 * temporal_derivative(sys, u_half)
    out = u_n + dt * sys.rhs(u_n) + (dt * dt * sixth) * g
    return _finite(out, "stage-2 predictor", stage=2)


def converged(nrm, prev, tol) -> bool:
    """Update-size test plus the contraction-based remaining-error estimate."""
    if nrm < tol:
        return True
    if prev is not None and prev > 0:
        theta = nrm / prev
        return bool(theta < 1 and theta / (1 - theta) * nrm < tol)
    return False


def _newton(sys: OdeSystem, base: np.ndarray, ca, cb, x0: np.ndarray, cfg: NewtonConfig, stage: int):
    """Solve ``base + ca L(x) + cb G(x) - x = 0``; return (x, iters, last_norm).

    Stops at update ``k`` when ``||du_k|| < tol`` or when the error left
    after it, estimated from the contraction ``theta = ||du_k|| / ||du_{k-1}||``
    as ``theta / (1 - theta) ||du_k||``, is below ``tol``. ``iters`` is that
    ``k``: the number of corrections before the one that confirmed
    convergence, so an affine residual reports 1.
    """
    x = x0
    eye = np.eye(sys.dim, dtype=x.dtype if x.dtype != object else object)
    first = prev = nrm = None
    for k in range(cfg.max_iter):
        d = derivatives(sys, x)
        F = base + ca * d.rhs + cb * d.g - x
        J = ca * d.jac + cb * d.g_jac - eye
        try:
            delta = lu_solve(J, -F)
        except StiffStepError as exc:
            exc.stage = stage
            raise
        x = x + delta
        if not all_finite(x):
            raise DomainError("non-finite Newton iterate", stage=stage)
        nrm = norm_linf(delta)
        if first is None:
            first = nrm
        elif nrm > DIVERGENCE_GROWTH * first and nrm > cfg.atol:
            raise NewtonDiverged(f"Newton update grew from {float(first):.3e} to {float(nrm):.3e}", stage=stage)
        if converged(nrm, prev, cfg.atol + cfg.rtol * norm_linf(x)):
            return x, k, nrm
        prev = nrm
    raise NewtonDiverged(f"no convergence in {cfg.max_iter} iterations (last update {float(nrm):.3e})", stage=stage)


def _solve_stage(sys, base, ca, cb, guess, fallback, cfg, stage):
    try:
        x, iters, nrm = _newton(sys, base, ca, cb, guess, cfg, stage)
        return x, iters, nrm, False
    except (NewtonDiverged, DomainError) as exc:
        if not cfg.restart_from_previous:
            raise
        log.debug("stage %d: %s; restarting from u_n", stage, exc)
    x, iters, nrm = _newton(sys, base, ca, cb, fallback, cfg, stage)
    return x, iters, nrm, True


def _stage1_base(sys, u_n, dt, s1, L_n, G_n):
    return u_n + (dt * s1.a1) * L_n + (dt * dt * s1.b1) * G_n


def newton_stage1(sys: OdeSystem, u_n: np.ndarray, dt, cfg: NewtonConfig = NewtonConfig(), guess=None):
    """Solve the half-step equation; returns ``(u_half, iters)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    dt = _dt(sys, dt)
    s1 = solve_stage1(sys.precision)
    L_n, G_n = sys.rhs(u_n), temporal_derivative(sys, u_n)
    base = _stage1_base(sys, u_n, dt, s1, L_n, G_n)
    x0 = predict_stage1(sys, u_n, dt) if guess is None else guess
    x, iters, _, _ = _solve_stage(sys, base, dt * s1.a2, dt * dt * s1.b2, x0, u_n, cfg, 1)
    return x, iters


def newton_stage2(
    sys: OdeSystem,
    u_n: np.ndarray,
    u_half: np.ndarray,
    dt,
    params: SchemeParams = SchemeParams(),
    cfg: NewtonConfig = NewtonConfig(),
    guess=None,
):
    """Solve the full-step equation given the converged half step; returns ``(u_next, iters)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    dt = _dt(sys, dt)
    _, s2 = scheme_coefficients(params, sys.precision)
    base = _stage2_base(sys, u_n, u_half, dt, s2)
    x0 = predict_stage2(sys, u_n, u_half, dt) if guess is None else guess
    x, iters, _, _ = _solve_stage(sys, base, dt * s2.a5, dt * dt * s2.b5, x0, u_n, cfg, 2)
    return x, iters


def _stage2_base(sys, u_n, u_half, dt, s2, L_n=None, G_n=None):
    if L_n is None:
        L_n, G_n = sys.rhs(u_n), temporal_derivative(sys, u_n)
    # L and G at the half step do not depend on the iterate: evaluated once.
    L_h, G_h = sys.rhs(u_half), temporal_derivative(sys, u_half)
    return u_n + dt * (s2.a3 * L_n + s2.a4 * L_h) + (dt * dt) * (s2.b3 * G_n + s2.b4 * G_h)


def step_implicit_tsfo(
    sys: OdeSystem,
    u_n: np.ndarray,
    dt,
    params: SchemeParams = SchemeParams(),
    cfg: NewtonConfig = NewtonConfig(),
) -> tuple[np.ndarray, StepStats]:
    """One step of the implicit scheme: predictor, Newton, predictor, Newton."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    dt = _dt(sys, dt)
    s1, s2 = scheme_coefficients(params, sys.precision)
    p = sys.precision
    L_n, G_n = sys.rhs(u_n), temporal_derivative(sys, u_n)
    _finite(L_n, "L(u_n)")

    pred1 = _finite(u_n + (dt * p.scalar(0.5)) * L_n + (dt * dt * p.scalar(0.125)) * G_n, "stage-1 predictor", 1)
    base1 = _stage1_base(sys, u_n, dt, s1, L_n, G_n)
    u_half, it1, n1, r1 = _solve_stage(sys, base1, dt * s1.a2, dt * dt * s1.b2, pred1, u_n, cfg, 1)

    L_h, G_h = sys.rhs(u_half), temporal_derivative(sys, u_half)
    pred2 = _finite(u_n + dt * L_n + (dt * dt / 6) * (G_n + 2 * G_h), "stage-2 predictor", 2)
    base2 = u_n + dt * (s2.a3 * L_n + s2.a4 * L_h) + (dt * dt) * (s2.b3 * G_n + s2.b4 * G_h)
    u_next, it2, n2, r2 = _solve_stage(sys, base2, dt * s2.a5, dt * dt * s2.b5, pred2, u_n, cfg, 2)

    return u_next, StepStats(it1, it2, float(abs(n1)), float(abs(n2)), r1 or r2)


def step_explicit_tsfo(sys: OdeSystem, u_n: np.ndarray, dt) -> np.ndarray:
    """Explicit two-stage fourth-order step (the Newton predictors composed)."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    with np.errstate(over="ignore", invalid="ignore"):
        u_half = predict_stage1(sys, u_n, dt)
        return predict_stage2(sys, u_n, u_half, dt)
