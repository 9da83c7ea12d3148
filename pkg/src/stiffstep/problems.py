"""Benchmark problems: a separated linear system, Robertson kinetics, an
eight-species ozone mechanism and the stiff van der Pol oscillator.

Every problem carries an analytic Jacobian and second contraction, and can be
built in any :class:`~stiffstep.linalg.Precision`. Rate constants are parsed
from decimal strings so that extended-precision runs see the exact decimals.
Double-precision problems also expose a numba ``fast_rhs(u, out)`` kernel for
long reference runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numba
import numpy as np

from stiffstep.linalg import DOUBLE, Precision, as_vector, get_precision
from stiffstep.model import OdeSystem


@dataclass(frozen=True)
class BenchmarkProblem:
    name: str
    system: OdeSystem
    u0: np.ndarray
    t_end_options: tuple[float, ...]
    exact: Optional[Callable[[float], np.ndarray]] = None
    fast_rhs: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.u0) != self.system.dim:
            raise ValueError("u0 dimension does not match the system")

    @property
    def default_t_end(self) -> float:
        return self.t_end_options[0]

    @property
    def precision(self) -> Precision:
        return self.system.precision


def _dtype(p: Precision):
    return object if p.is_mp else p.dtype


def _vec(p: Precision, items) -> np.ndarray:
    return np.array(items, dtype=_dtype(p))


def _consts(p: Precision, **kw):
    return {k: p.scalar(v) for k, v in kw.items()}


# linear, decoupled ---------------------------------------------------------

@numba.njit
def _linear_kernel(u, out):
    out[0] = -1000.0 * u[0] + 1.0
    out[1] = -u[1] + 1.0


def linear_separated(precision: Precision | str = DOUBLE) -> BenchmarkProblem:
    """``u1' = -1000 u1 + 1``, ``u2' = -u2 + 1``, ``u(0) = 0``."""
    p = get_precision(precision)
    k = _consts(p, a="1000", one="1")
    zero = p.scalar(0)
    A = np.array([[-k["a"], zero], [zero, -k["one"]]], dtype=_dtype(p))
    Z = p.zeros((2, 2))

    def rhs(u):
        return _vec(p, [-k["a"] * u[0] + k["one"], -u[1] + k["one"]])

    def exact(t):
        t = p.scalar(t) if isinstance(t, (int, float, str)) else t
        one = k["one"]
        return _vec(p, [(one - p.exp(-k["a"] * t)) / k["a"], one - p.exp(-t)])

    sys = OdeSystem(2, rhs, lambda u: A, lambda u, w: Z, precision=p, name="linear")
    return BenchmarkProblem("linear", sys, as_vector([0, 0], p), (10.0,), exact,
                            _linear_kernel if p.dtype is np.float64 else None)


# Robertson -----------------------------------------------------------------

@numba.njit
def _robertson_kernel(u, out):
    out[0] = -0.04 * u[0] + 1e4 * u[1] * u[2]
    out[1] = 0.04 * u[0] - 1e4 * u[1] * u[2] - 3e7 * u[1] * u[1]
    out[2] = 3e7 * u[1] * u[1]


def robertson(precision: Precision | str = DOUBLE) -> BenchmarkProblem:
    p = get_precision(precision)
    k = _consts(p, k1="0.04", k2="1e4", k3="3e7")
    k1, k2, k3 = k["k1"], k["k2"], k["k3"]
    zero = p.scalar(0)

    def rhs(u):
        r2 = k2 * u[1] * u[2]
        r3 = k3 * u[1] * u[1]
        return _vec(p, [-k1 * u[0] + r2, k1 * u[0] - r2 - r3, r3])

    def jac(u):
        return np.array(
            [
                [-k1, k2 * u[2], k2 * u[1]],
                [k1, -k2 * u[2] - 2 * k3 * u[1], -k2 * u[1]],
                [zero, 2 * k3 * u[1], zero],
            ],
            dtype=_dtype(p),
        )

    def contraction(u, w):
        M = p.zeros((3, 3))
        M[0, 1], M[0, 2] = k2 * w[2], k2 * w[1]
        M[1, 1], M[1, 2] = -2 * k3 * w[1] - k2 * w[2], -k2 * w[1]
        M[2, 1] = 2 * k3 * w[1]
        return M

    sys = OdeSystem(3, rhs, jac, contraction, precision=p, name="robertson")
    return BenchmarkProblem("robertson", sys, as_vector([1, 0, 0], p), (10.0,), None,
                            _robertson_kernel if p.dtype is np.float64 else None)


# ozone ---------------------------------------------------------------------

@numba.njit
def _ozone_kernel(u, out):
    q = 280.0 * u[5] * u[7]
    out[0] = -1.71 * u[0] + 0.43 * u[1] + 8.32 * u[2] + 0.0007
    out[1] = 1.71 * u[0] - 8.75 * u[1]
    out[2] = -10.03 * u[2] + 0.43 * u[3] + 0.035 * u[4]
    out[3] = 8.32 * u[1] + 1.71 * u[2] - 1.12 * u[3]
    out[4] = -1.745 * u[4] + 0.43 * u[5] + 0.43 * u[6]
    out[5] = -q + 0.69 * u[3] + 1.71 * u[4] - 0.43 * u[5] + 0.69 * u[6]
    out[6] = q - 1.81 * u[6]
    out[7] = -q + 1.81 * u[6]


# linear part of the ozone mechanism as (row, col, rate) triples
_OZONE_LINEAR = [
    (0, 0, "-1.71"), (0, 1, "0.43"), (0, 2, "8.32"),
    (1, 0, "1.71"), (1, 1, "-8.75"),
    (2, 2, "-10.03"), (2, 3, "0.43"), (2, 4, "0.035"),
    (3, 1, "8.32"), (3, 2, "1.71"), (3, 3, "-1.12"),
    (4, 4, "-1.745"), (4, 5, "0.43"), (4, 6, "0.43"),
    (5, 3, "0.69"), (5, 4, "1.71"), (5, 5, "-0.43"), (5, 6, "0.69"),
    (6, 6, "-1.81"),
    (7, 6, "1.81"),
]
# sign of the 280 u6 u8 term in rows 6, 7, 8
_OZONE_BILINEAR = ((5, -1), (6, 1), (7, -1))


def ozone(precision: Precision | str = DOUBLE) -> BenchmarkProblem:
    """Eight species; the only nonlinearity is ``280 u6 u8``. ``u7(0)`` is taken as 0."""
    p = get_precision(precision)
    A = p.zeros((8, 8))
    for i, j, v in _OZONE_LINEAR:
        A[i, j] = p.scalar(v)
    src = p.zeros(8)
    src[0] = p.scalar("0.0007")
    kq = p.scalar("280")

    def rhs(u):
        out = A @ u + src
        q = kq * u[5] * u[7]
        for r, s in _OZONE_BILINEAR:
            out[r] = out[r] + s * q
        return out

    def jac(u):
        J = A.copy()
        for r, s in _OZONE_BILINEAR:
            J[r, 5] = J[r, 5] + s * kq * u[7]
            J[r, 7] = J[r, 7] + s * kq * u[5]
        return J

    def contraction(u, w):
        M = p.zeros((8, 8))
        for r, s in _OZONE_BILINEAR:
            M[r, 5] = s * kq * w[7]
            M[r, 7] = s * kq * w[5]
        return M

    sys = OdeSystem(8, rhs, jac, contraction, precision=p, name="ozone")
    u0 = as_vector(["1", "0", "0", "0", "0", "0", "0", "0.0057"], p)
    return BenchmarkProblem("ozone", sys, u0, (1.0, 10.0, 321.8122), None,
                            _ozone_kernel if p.dtype is np.float64 else None)


# van der Pol ---------------------------------------------------------------

def _vdp_kernel(nu: float):
    nu = float(nu)

    @numba.njit
    def kernel(u, out):
        out[0] = u[1]
        out[1] = nu * (1.0 - u[0] * u[0]) * u[1] - u[0]

    return kernel


_VDP_KERNELS: dict[float, Callable] = {}


def van_der_pol(nu: float | str = 100, precision: Precision | str = DOUBLE) -> BenchmarkProblem:
    """``u1' = u2``, ``u2' = nu (1 - u1^2) u2 - u1`` from ``(2, 0)`` to ``t = 100``."""
    p = get_precision(precision)
    n = p.scalar(str(nu) if not isinstance(nu, str) else nu)
    one, zero = p.scalar(1), p.scalar(0)

    def rhs(u):
        return _vec(p, [u[1], n * (one - u[0] * u[0]) * u[1] - u[0]])

    def jac(u):
        return np.array([[zero, one], [-2 * n * u[0] * u[1] - one, n * (one - u[0] * u[0])]], dtype=_dtype(p))

    def contraction(u, w):
        return np.array(
            [[zero, zero], [-2 * n * (u[1] * w[0] + u[0] * w[1]), -2 * n * u[0] * w[0]]], dtype=_dtype(p)
        )

    fast = None
    if p.dtype is np.float64:
        key = float(nu)
        if key not in _VDP_KERNELS:
            _VDP_KERNELS[key] = _vdp_kernel(key)
        fast = _VDP_KERNELS[key]
    sys = OdeSystem(2, rhs, jac, contraction, precision=p, name="vdp")
    return BenchmarkProblem("vdp", sys, as_vector([2, 0], p), (100.0,), None, fast)


PROBLEMS = {
    "linear": linear_separated,
    "robertson": robertson,
    "ozone": ozone,
    "vdp": van_der_pol,
}


def get_problem(name: str, precision: Precision | str = DOUBLE) -> BenchmarkProblem:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {', '.join(PROBLEMS)}") from None
    return factory(precision=precision)
