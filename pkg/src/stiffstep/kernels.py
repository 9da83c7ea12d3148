"""Compiled kernels for long explicit reference runs.

Right-hand sides are written as ``fn(u, out)`` numba functions and passed to
the driver as first-class function arguments.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit
def rk4_compensated_kernel(fn, u0, dt, n_steps):
    """Classical RK4 with Kahan-compensated state update.

    Returns ``(u, bad_step)``; ``bad_step`` is the first step index that
    produced a non-finite state, or -1.
    """
    u = u0.copy()
    m = u.shape[0]
    comp = np.zeros(m)
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    half = 0.5 * dt
    sixth = dt / 6.0
    for s in range(n_steps):
        fn(u, k1)
        for i in range(m):
            tmp[i] = u[i] + half * k1[i]
        fn(tmp, k2)
        for i in range(m):
            tmp[i] = u[i] + half * k2[i]
        fn(tmp, k3)
        for i in range(m):
            tmp[i] = u[i] + dt * k3[i]
        fn(tmp, k4)
        ok = True
        for i in range(m):
            y = sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) - comp[i]
            t = u[i] + y
            comp[i] = (t - u[i]) - y
            u[i] = t
            if not np.isfinite(t):
                ok = False
        if not ok:
            return u, s
    return u, -1


def run_rk4_reference(fn, u0: np.ndarray, dt: float, n_steps: int):
    return rk4_compensated_kernel(fn, np.ascontiguousarray(u0, dtype=np.float64), float(dt), int(n_steps))
