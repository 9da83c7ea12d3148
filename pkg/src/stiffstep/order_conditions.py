"""Coefficients of the two-stage fourth-order implicit scheme.

Stage 1 (half step)::

    u_h = u_n + dt (a1 L(u_n) + a2 L(u_h)) + dt^2 (b1 G(u_n) + b2 G(u_h))

Stage 2 (full step)::

    u_1 = u_n + dt (a3 L(u_n) + a4 L(u_h) + a5 L(u_1))
              + dt^2 (b3 G(u_n) + b4 G(u_h) + b5 G(u_1))

Matching Taylor expansions gives four linear conditions per stage. Stage 1
has a unique solution; stage 2 leaves a two-parameter family in (C, D).
Coefficients are computed exactly with Fractions and rounded once into the
requested precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from stiffstep.linalg import DOUBLE, Precision, lu_solve

A_STABLE_C_RANGE = (0.018824, 0.045589)
DEFAULT_C = 0.018924

# Rows: conditions on (a1, a2, b1, b2) for the half step.
STAGE1_MATRIX = [
    [Fraction(1), Fraction(1), Fraction(0), Fraction(0)],
    [Fraction(0), Fraction(1, 2), Fraction(1), Fraction(1)],
    [Fraction(0), Fraction(1, 8), Fraction(0), Fraction(1, 2)],
    [Fraction(0), Fraction(1, 48), Fraction(0), Fraction(1, 8)],
]
STAGE1_RHS = [Fraction(1, 2), Fraction(1, 8), Fraction(1, 48), Fraction(1, 384)]

# Rows: conditions on (a3, a4, a5, b3, b4, b5) for the full step.
STAGE2_MATRIX = [
    [Fraction(1), Fraction(1), Fraction(1), Fraction(0), Fraction(0), Fraction(0)],
    [Fraction(0), Fraction(1, 2), Fraction(1), Fraction(1), Fraction(1), Fraction(1)],
    [Fraction(0), Fraction(1, 8), Fraction(1, 2), Fraction(0), Fraction(1, 2), Fraction(1)],
    [Fraction(0), Fraction(1, 48), Fraction(1, 6), Fraction(0), Fraction(1, 8), Fraction(1, 2)],
]
STAGE2_RHS = [Fraction(1), Fraction(1, 2), Fraction(1, 6), Fraction(1, 24)]


@dataclass(frozen=True)
class Stage1Coefficients:
    a1: float
    a2: float
    b1: float
    b2: float

    def as_tuple(self):
        return (self.a1, self.a2, self.b1, self.b2)


@dataclass(frozen=True)
class Stage2Coefficients:
    a3: float
    a4: float
    a5: float
    b3: float
    b4: float
    b5: float
    c_param: float
    d_param: float

    def as_tuple(self):
        return (self.a3, self.a4, self.a5, self.b3, self.b4, self.b5)


@dataclass(frozen=True)
class SchemeParams:
    """Free parameters (C, D) of the full-step family.

    In ``a_stable_mode`` the pair is restricted to ``D = -C`` with C inside
    the A-stable interval; otherwise any real pair is accepted.
    """

    c_param: float = DEFAULT_C
    d_param: float = -DEFAULT_C
    a_stable_mode: bool = True

    def __post_init__(self):
        if self.a_stable_mode:
            if self.d_param != -self.c_param:
                raise ValueError("A-stable mode requires d_param == -c_param")
            lo, hi = A_STABLE_C_RANGE
            if not lo <= self.c_param <= hi:
                raise ValueError(f"c_param={self.c_param} outside the A-stable interval [{lo}, {hi}]")

    @classmethod
    def a_stable(cls, c: float = DEFAULT_C) -> "SchemeParams":
        return cls(c, -c, True)

    @classmethod
    def general(cls, c: float, d: float) -> "SchemeParams":
        return cls(c, d, False)


def _exact(x) -> Fraction:
    # decimal reading of a float: 0.018924 is the decimal number
    return x if isinstance(x, Fraction) else Fraction(repr(float(x))) if isinstance(x, float) else Fraction(x)


STAGE1_EXACT = (Fraction(1, 4), Fraction(1, 4), Fraction(1, 48), Fraction(-1, 48))


def stage2_exact(c, d) -> tuple[Fraction, ...]:
    c, d = _exact(c), _exact(d)
    return (
        Fraction(1, 6) + 4 * c + d / 2,
        Fraction(2, 3) - 8 * c + 2 * d,
        Fraction(1, 6) + 4 * c - Fraction(5, 2) * d,
        c,
        d,
        d / 2 - c,
    )


@lru_cache(maxsize=16)
def solve_stage1(precision: Precision = DOUBLE) -> Stage1Coefficients:
    """The unique half-step coefficients (1/4, 1/4, 1/48, -1/48)."""
    return Stage1Coefficients(*(precision.scalar(x) for x in STAGE1_EXACT))


def solve_stage1_numeric() -> np.ndarray:
    """Assemble the half-step order conditions and solve them by LU."""
    A = np.array([[float(x) for x in row] for row in STAGE1_MATRIX])
    b = np.array([float(x) for x in STAGE1_RHS])
    return lu_solve(A, b)


def stage1_residuals(coef) -> np.ndarray:
    x = np.array([float(v) for v in (coef.as_tuple() if hasattr(coef, "as_tuple") else coef)])
    A = np.array([[float(v) for v in row] for row in STAGE1_MATRIX])
    return A @ x - np.array([float(v) for v in STAGE1_RHS])


def stage2_residuals(coef) -> np.ndarray:
    x = np.array([float(v) for v in (coef.as_tuple() if hasattr(coef, "as_tuple") else coef)])
    A = np.array([[float(v) for v in row] for row in STAGE2_MATRIX])
    return A @ x - np.array([float(v) for v in STAGE2_RHS])


@lru_cache(maxsize=256)
def _stage2_cached(c, d, precision: Precision) -> Stage2Coefficients:
    vals = stage2_exact(c, d)
    return Stage2Coefficients(*(precision.scalar(v) for v in vals), c_param=c, d_param=d)


def stage2_family(c: float, d: float, precision: Precision = DOUBLE) -> Stage2Coefficients:
    """Full-step coefficients for parameters (C, D); fourth order for every pair."""
    return _stage2_cached(c, d, precision)


def scheme_coefficients(params: SchemeParams, precision: Precision = DOUBLE):
    return solve_stage1(precision), stage2_family(params.c_param, params.d_param, precision)
