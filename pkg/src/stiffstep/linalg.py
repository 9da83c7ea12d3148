"""Small dense linear algebra and the scalar-precision abstraction.

Every integrator in the package works on plain numpy arrays. The element type
is chosen by a :class:`Precision`: IEEE double (default), x87 extended
``np.longdouble``, or arbitrary precision through mpmath (object arrays).
Complex arrays pass through untouched, which is what the scalar test equation
``u' = lambda u`` needs.

The LU routine is written against Python scalars rather than LAPACK so that it
works for all three element types; the systems here are at most 8x8 (16x16
for the stacked Gauss-Legendre stages).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from stiffstep.errors import DomainError, SingularMatrix

PIVOT_RTOL = 1e-14


@dataclass(frozen=True)
class Precision:
    """Scalar type used for states, Jacobians and scheme coefficients.

    ``tag`` doubles as the cache key component for reference solutions.
    """

    tag: str
    dtype: Any
    dps: int | None = None
    eps: float = field(default=float(np.finfo(np.float64).eps), compare=False)

    @property
    def is_mp(self) -> bool:
        return self.dtype is object

    def _mp(self):
        import mpmath

        # mpmath keeps one global working precision; the last precision used wins
        if mpmath.mp.dps != self.dps:
            mpmath.mp.dps = self.dps
        return mpmath

    def scalar(self, x):
        """Convert ``x`` (int, float, str, Fraction or scalar) to this precision.

        Floats go through their shortest decimal repr, so ``0.018924`` means
        the decimal number, not its binary neighbour.
        """
        if isinstance(x, Fraction):
            if self.dtype is np.float64:
                return float(x)  # correctly rounded, no overflow for huge terms
            return self.scalar(x.numerator) / self.scalar(x.denominator)
        if isinstance(x, float):
            x = repr(x)
        if self.is_mp:
            mpmath = self._mp()
            return mpmath.mpf(x)
        if self.dtype is np.float64:
            return float(x)
        return self.dtype(x)

    def array(self, values) -> np.ndarray:
        if self.is_mp:
            return np.array([self.scalar(v) for v in values], dtype=object)
        return np.array(values, dtype=self.dtype)

    def zeros(self, shape) -> np.ndarray:
        if self.is_mp:
            out = np.empty(shape, dtype=object)
            out[...] = self.scalar(0)
            return out
        return np.zeros(shape, dtype=self.dtype)

    def exp(self, x):
        if self.is_mp:
            mpmath = self._mp()
            if isinstance(x, np.ndarray):
                return np.array([mpmath.exp(v) for v in x.ravel()], dtype=object).reshape(x.shape)
            return mpmath.exp(x)
        return np.exp(x)

    def sqrt(self, x):
        if self.is_mp:
            return self._mp().sqrt(x)
        return np.sqrt(x)

    def format(self, x) -> str:
        """Round-trippable decimal text for one scalar."""
        if self.is_mp:
            return self._mp().nstr(x, self.dps + 5, min_fixed=1, max_fixed=0)
        if self.dtype is np.float64:
            return repr(float(x))
        return np.format_float_scientific(x, unique=True)


DOUBLE = Precision("double", np.float64)
LONGDOUBLE = Precision("longdouble", np.longdouble, eps=float(np.finfo(np.longdouble).eps))


def mp_precision(dps: int = 34) -> Precision:
    return Precision(f"mp{dps}", object, dps=dps, eps=10.0 ** (1 - dps))


def get_precision(tag: str | Precision) -> Precision:
    if isinstance(tag, Precision):
        return tag
    if tag == "double":
        return DOUBLE
    if tag == "longdouble":
        return LONGDOUBLE
    if tag.startswith("mp") and tag[2:].isdigit():
        return mp_precision(int(tag[2:]))
    raise ValueError(f"unknown precision {tag!r} (use double, longdouble or mpNN)")


def precision_of(a: np.ndarray) -> Precision:
    """Best guess of the precision an array was built in."""
    if a.dtype == object:
        import mpmath

        return mp_precision(mpmath.mp.dps)
    if a.dtype in (np.longdouble, np.clongdouble) and np.longdouble is not np.float64:
        return LONGDOUBLE
    return DOUBLE


def all_finite(a) -> bool:
    a = np.asarray(a)
    if a.dtype == object:
        import mpmath

        return all(mpmath.isfinite(v) if not isinstance(v, (int, float, complex)) else math.isfinite(abs(v))
                   for v in a.ravel())
    return bool(np.isfinite(a).all())


def as_vector(values: Sequence, precision: Precision = DOUBLE) -> np.ndarray:
    """Build a state vector from problem data, rejecting empty or non-finite input."""
    v = precision.array(values)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("a state vector needs at least one entry")
    if not all_finite(v):
        raise DomainError("non-finite entry in state vector")
    return v


def norm_l2(v) -> Any:
    v = np.asarray(v)
    if v.size == 0:
        return 0.0
    if v.dtype == object:
        import mpmath

        return mpmath.sqrt(sum(abs(x) ** 2 for x in v.ravel()))
    a = np.abs(v)
    m = np.max(a)
    if m == 0 or not np.isfinite(m):
        return m
    # scaled to avoid under/overflow of the squares
    return m * np.sqrt(np.sum((a / m) ** 2))


def norm_linf(v) -> Any:
    v = np.asarray(v)
    if v.size == 0:
        return 0.0
    if v.dtype == object:
        return max(abs(x) for x in v.ravel())
    return np.max(np.abs(v))


def _rows(a: np.ndarray) -> list[list]:
    # tolist() turns float64/complex128 into fast Python scalars; it would
    # silently round longdouble, so other dtypes keep their numpy scalars.
    if a.dtype in (np.float64, np.complex128):
        return a.tolist()
    return [list(r) for r in a]


@dataclass(frozen=True)
class LUFactors:
    lu: list[list]
    perm: list[int]
    dtype: Any


def lu_factor(a) -> LUFactors:
    """Doolittle LU with partial (row) pivoting.

    Raises SingularMatrix when a pivot is below ``1e-14`` times the largest
    entry of its original row.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    m = _rows(a)
    scale = [max(abs(x) for x in row) for row in m]
    perm = list(range(n))
    for k in range(n):
        p = max(range(k, n), key=lambda i: abs(m[i][k]))
        if abs(m[p][k]) <= PIVOT_RTOL * scale[perm[p]] or scale[perm[p]] == 0:
            raise SingularMatrix(f"pivot {abs(m[p][k])!s} in column {k} below tolerance")
        if p != k:
            m[k], m[p] = m[p], m[k]
            perm[k], perm[p] = perm[p], perm[k]
        pivot = m[k][k]
        row_k = m[k]
        for i in range(k + 1, n):
            row_i = m[i]
            f = row_i[k] / pivot
            row_i[k] = f
            if f != 0:
                for j in range(k + 1, n):
                    row_i[j] -= f * row_k[j]
    return LUFactors(m, perm, a.dtype)


def lu_solve_factored(factors: LUFactors, b) -> np.ndarray:
    b = np.asarray(b)
    m, perm = factors.lu, factors.perm
    n = len(perm)
    if b.shape != (n,):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({n},)")
    bl = _rows(b[None, :])[0]
    y = [bl[p] for p in perm]
    for i in range(n):
        row = m[i]
        s = y[i]
        for j in range(i):
            s -= row[j] * y[j]
        y[i] = s
    for i in range(n - 1, -1, -1):
        row = m[i]
        s = y[i]
        for j in range(i + 1, n):
            s -= row[j] * y[j]
        y[i] = s / row[i]
    dtype = np.result_type(factors.dtype, b.dtype) if object not in (factors.dtype, b.dtype) else object
    return np.array(y, dtype=dtype)


def lu_solve(a, b) -> np.ndarray:
    """Solve ``a x = b`` for a small dense square ``a``."""
    return lu_solve_factored(lu_factor(a), b)
