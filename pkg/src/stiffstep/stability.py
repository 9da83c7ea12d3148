"""Linear stability of the two-stage scheme on ``u' = lambda u``.

With ``z = lambda dt`` the half step multiplies by

    R(z) = (1 + z/4 + z^2/48) / (1 - z/4 + z^2/48)

and the full step by

    G(z) = [1 + z (a3 + a4 R) + z^2 (b3 + b4 R)] / (1 - a5 z - b5 z^2).

Writing ``R = N_R / D_R`` turns ``G`` into a ratio of quartics ``P / Q``; the
exact (Fraction) coefficients of ``P`` and ``Q`` feed the series defect and
the limit at infinity, ``(C + D) / (C - D/2)``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from stiffstep.errors import PoleEvaluation
from stiffstep.order_conditions import DEFAULT_C, _exact, stage2_exact

log = logging.getLogger(__name__)

POLE_RTOL = 1e-14
# Validity tolerance on max|G(iy)| used by the scan; see scan_a_stability.
SCAN_TOL = 1e-6
STRICT_TOL = 1e-12

R_NUM = (Fraction(1), Fraction(1, 4), Fraction(1, 48))
R_DEN = (Fraction(1), Fraction(-1, 4), Fraction(1, 48))
R_POLES = (complex(6, 2 * math.sqrt(3)), complex(6, -2 * math.sqrt(3)))


@dataclass(frozen=True)
class AmplificationParams:
    c_param: float = DEFAULT_C
    d_param: float = -DEFAULT_C

    @classmethod
    def reduced(cls, c: float) -> "AmplificationParams":
        return cls(c, -c)


def _pole_check(den, z):
    bad = np.abs(den) < POLE_RTOL * (1 + np.abs(z) ** 2)
    if np.any(bad):
        raise PoleEvaluation(f"evaluation at (or next to) a pole: z={np.asarray(z)[bad].ravel()[0]!r}")


def amplification_r(z):
    """Half-step factor R(z); scalar or array input."""
    z = np.asarray(z, dtype=complex)
    den = 1 - z / 4 + z * z / 48
    _pole_check(den, z)
    out = (1 + z / 4 + z * z / 48) / den
    return out if out.ndim else complex(out)


def amplification_g(z, p: AmplificationParams = AmplificationParams()):
    """Full-step factor G(z; C, D) from the general closed form."""
    c, d = float(p.c_param), float(p.d_param)
    z = np.asarray(z, dtype=complex)
    R = np.asarray(amplification_r(z))
    a3, a4, a5 = 1 / 6 + 4 * c + d / 2, 2 / 3 - 8 * c + 2 * d, 1 / 6 + 4 * c - 2.5 * d
    b3, b4, b5 = c, d, d / 2 - c
    den = 1 - a5 * z - b5 * z * z
    _pole_check(den, z)
    out = (1 + z * (a3 + a4 * R) + z * z * (b3 + b4 * R)) / den
    return out if out.ndim else complex(out)


def amplification_g_reduced(z, c: float):
    """G(z) for D = -C written in the simplified form."""
    z = np.asarray(z, dtype=complex)
    R = np.asarray(amplification_r(z))
    den = 1 - (1 / 6 + 6.5 * c) * z + 1.5 * c * z * z
    _pole_check(den, z)
    out = (1 + z * (1 / 6 + 3.5 * c + (2 / 3 - 10 * c) * R) + c * z * z * (1 - R)) / den
    return out if out.ndim else complex(out)


# exact polynomial algebra (coefficient lists, lowest degree first)

def _pmul(p: Sequence[Fraction], q: Sequence[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, x in enumerate(p):
        for j, y in enumerate(q):
            out[i + j] += x * y
    return out


def _padd(p, q):
    n = max(len(p), len(q))
    return [(p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0) for i in range(n)]


def _trim(p):
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p


def g_polynomials_from_coefficients(a3, a4, a5, b3, b4, b5):
    """Exact numerator and denominator of G for arbitrary stage-2 coefficients."""
    a3, a4, a5, b3, b4, b5 = (_exact(x) for x in (a3, a4, a5, b3, b4, b5))
    P = _padd(_pmul([Fraction(1), a3, b3], R_DEN), _pmul([Fraction(0), a4, b4], R_NUM))
    Q = _pmul([Fraction(1), -a5, -b5], R_DEN)
    return _trim(P), _trim(Q)


def g_polynomials(p: AmplificationParams = AmplificationParams()):
    return g_polynomials_from_coefficients(*stage2_exact(p.c_param, p.d_param))


def g_infinity(p: AmplificationParams = AmplificationParams()) -> float:
    """lim G(z) as |z| -> inf; ``inf`` when the numerator has higher degree."""
    P, Q = g_polynomials(p)
    if len(P) < len(Q):
        return 0.0
    if len(P) > len(Q):
        return math.inf
    return float(P[-1] / Q[-1])


def _series_div(P, Q, order: int) -> list[Fraction]:
    if Q[0] == 0:
        raise PoleEvaluation("denominator vanishes at z = 0")
    s: list[Fraction] = []
    for k in range(order + 1):
        acc = P[k] if k < len(P) else Fraction(0)
        for j in range(1, min(k, len(Q) - 1) + 1):
            acc -= Q[j] * s[k - j]
        s.append(acc / Q[0])
    return s


def series_coefficients(p: AmplificationParams, order: int) -> list[Fraction]:
    """Exact Maclaurin coefficients of G up to ``z**order``."""
    return _series_div(*g_polynomials(p), order)


def _defect(P, Q, order: int) -> list[float]:
    if order > 8:
        raise ValueError("order must be at most 8")
    s = _series_div(P, Q, order)
    return [float(abs(s[k] - Fraction(1, math.factorial(k)))) for k in range(order + 1)]


def taylor_defect(p: AmplificationParams, order: int = 5) -> list[float]:
    """``|[z^k] G - 1/k!|`` for k = 0..order, by exact power-series division."""
    return _defect(*g_polynomials(p), order)


def taylor_defect_from_coefficients(coefs: Sequence, order: int = 5) -> list[float]:
    """As :func:`taylor_defect` for an explicit ``(a3, a4, a5, b3, b4, b5)``."""
    return _defect(*g_polynomials_from_coefficients(*coefs), order)


def denominator_roots(c: float) -> np.ndarray:
    """Roots of ``1 - (1/6 + 13C/2) z + (3C/2) z^2`` (the D = -C stage-2 denominator)."""
    if c == 0:
        return np.array([6.0 + 0j])
    # cancellation-free quadratic formula; the far root may overflow to inf for tiny C
    a, b = 1.5 * c, -(1 / 6 + 6.5 * c)
    disc = b * b - 4 * a
    s = math.sqrt(disc) if disc >= 0 else 1j * math.sqrt(-disc)
    q = -0.5 * (b + math.copysign(1.0, b) * s)
    with np.errstate(over="ignore"):
        far = q / a if disc < 0 else float(np.float64(q) / np.float64(a))
    return np.array([far, 1 / q], dtype=complex)


def pole_analysis(c: float) -> tuple[bool, list[float]]:
    """Is G analytic in the closed left half-plane (D = -C)?

    Returns the verdict and the real parts of every pole, those of R included.
    For C < 0 the two real roots have product 2/(3C) < 0, so one of them is
    always negative.
    """
    roots = list(denominator_roots(c)) + list(R_POLES)
    re = [float(r.real) for r in roots]
    return all(x > 0 for x in re), re


@dataclass
class StabilityScanResult:
    c_values: np.ndarray
    max_abs_g: np.ndarray
    valid_mask: np.ndarray
    valid_interval: Optional[tuple[float, float]]
    analytic_mask: np.ndarray = field(repr=False, default=None)
    tol: float = SCAN_TOL

    def interval_at(self, tol: float) -> Optional[tuple[float, float]]:
        """Valid interval recomputed for another tolerance on max|G(iy)|."""
        mask = (self.max_abs_g <= 1 + tol) & self.analytic_mask
        return _largest_run(self.c_values, mask)

    def is_valid(self, c: float) -> bool:
        i = int(np.argmin(np.abs(self.c_values - c)))
        return bool(self.valid_mask[i])


def _largest_run(c_values, mask) -> Optional[tuple[float, float]]:
    best, start, best_len = None, None, 0
    for i, ok in enumerate(list(mask) + [False]):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            if i - start > best_len:
                best, best_len = (start, i - 1), i - start
            start = None
    if best is None:
        return None
    return float(c_values[best[0]]), float(c_values[best[1]])


def max_abs_g_on_axis(c: float, y: np.ndarray) -> float:
    """sup over the sampled ``y`` of |G(iy)| with D = -C; inf at a pole."""
    try:
        return float(np.max(np.abs(amplification_g(1j * np.asarray(y), AmplificationParams.reduced(c)))))
    except PoleEvaluation:
        return math.inf


def _scan_chunk(args):
    cs, y = args
    return [max_abs_g_on_axis(c, y) for c in cs]


def scan_a_stability(
    c_min: float = 0.0,
    c_max: float = 0.1,
    n_c: int = 5000,
    y_min: float = 1e-8,
    y_max: float = 1e4,
    n_y: int = 25000,
    tol: float = SCAN_TOL,
    workers: int = 1,
) -> StabilityScanResult:
    """Sample max|G(iy)| over a C grid (D = -C) and extract the valid C interval.

    C is valid when the sampled sup is at most ``1 + tol``, every pole lies in
    the right half-plane and |G(inf)| <= 1. ``tol`` defaults to 1e-6: the
    boundary excursions of |G| just outside the interval are of order 1e-8,
    so a 1e-12 threshold trims the lower end up to C ~ 0.01892.
    """
    if not 0 < y_min < y_max:
        raise ValueError("need 0 < y_min < y_max")
    if n_c < 2 or n_y < 2:
        raise ValueError("n_c and n_y must be at least 2")
    if c_min > c_max:
        raise ValueError("c_min must not exceed c_max")
    cs = np.linspace(c_min, c_max, n_c)
    y = np.logspace(math.log10(y_min), math.log10(y_max), n_y)
    if workers > 1:
        chunks = np.array_split(cs, workers)
        with ProcessPoolExecutor(workers) as ex:
            mx = np.concatenate([np.asarray(r) for r in ex.map(_scan_chunk, [(ch, y) for ch in chunks])])
    else:
        mx = np.array(_scan_chunk((cs, y)))
    analytic = np.array([pole_analysis(c)[0] and abs(g_infinity(AmplificationParams.reduced(c))) <= 1 for c in cs])
    valid = (mx <= 1 + tol) & analytic
    interval = _largest_run(cs, valid)
    if interval is None:
        log.warning("no valid C in [%g, %g]", c_min, c_max)
    return StabilityScanResult(cs, mx, valid, interval, analytic, tol)
