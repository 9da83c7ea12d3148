import math

import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from stiffstep.baselines import (
    GAUSS2_TABLEAU,
    RK4_TABLEAU,
    ButcherTableau,
    explicit_amplification,
    gauss2_amplification,
    integrate_fixed,
    rk4_compensated,
    step_irk4_gauss,
    step_rk4_explicit,
)
from stiffstep.errors import DomainError, StiffStepError
from stiffstep.kernels import run_rk4_reference
from stiffstep.linalg import LONGDOUBLE
from stiffstep.model import linear_system
from stiffstep.problems import linear_separated, robertson
from stiffstep.stability import AmplificationParams, amplification_g
from stiffstep.tsfo import step_explicit_tsfo, step_implicit_tsfo


def scalar(lam):
    return linear_system(np.array([[complex(lam)]]))


def test_tableaux_consistent():
    for t in (RK4_TABLEAU, GAUSS2_TABLEAU):
        assert sum(t.b) == pytest.approx(1, abs=1e-15)
        for ci, row in zip(t.c, t.a):
            assert sum(row) == pytest.approx(ci, abs=1e-15)
    assert GAUSS2_TABLEAU.stage_count == 2 and RK4_TABLEAU.stage_count == 4


def test_tableau_invariants_enforced():
    with pytest.raises(ValueError):
        ButcherTableau(a=((0.0,),), b=(0.5,), c=(0.0,))
    with pytest.raises(ValueError):
        ButcherTableau(a=((0.0, 0.0), (0.4, 0.0)), b=(0.5, 0.5), c=(0.0, 0.5))
    with pytest.raises(ValueError):
        ButcherTableau(a=((0.0,),), b=(1.0, 0.0), c=(0.0,))


def test_rk4_amplification_symbolic():
    # expand the four stages for u' = lambda u with h = 1
    z = sympy.symbols("z")
    k1 = z
    k2 = z * (1 + k1 / 2)
    k3 = z * (1 + k2 / 2)
    k4 = z * (1 + k3)
    amp = sympy.expand(1 + (k1 + 2 * k2 + 2 * k3 + k4) / 6)
    assert amp == sympy.expand(sum(z**k / sympy.factorial(k) for k in range(5)))
    for zv in (-0.5, -2.7, complex(-0.2, 1.3)):
        got = step_rk4_explicit(scalar(zv), np.array([1.0 + 0j]), 1.0)[0]
        assert got == pytest.approx(complex(amp.subs(z, zv)), rel=1e-14)


@given(st.complex_numbers(max_magnitude=3, allow_nan=False))
def test_explicit_methods_share_amplification(z):
    sys = scalar(z)
    u = np.array([1.0 + 0j])
    a = step_rk4_explicit(sys, u, 1.0)[0]
    b = step_explicit_tsfo(sys, u, 1.0)[0]
    assert abs(a - b) <= 1e-13 * max(1, abs(a))
    assert abs(a - explicit_amplification(z)) <= 1e-13 * max(1, abs(a))


def test_rk4_zero_step_and_exponential():
    sys = linear_system(np.array([[1.0]]))
    u = np.array([1.0])
    assert np.array_equal(step_rk4_explicit(sys, u, 0.0), u)
    out = integrate_fixed(sys, u, 1.0, 10, step_rk4_explicit)
    # ten applications of the quartic Taylor factor: error 2.08e-6, not < 3e-7
    assert out[0] == pytest.approx(explicit_amplification(0.1) ** 10, rel=1e-14)
    assert 2.0e-6 < abs(out[0] - math.e) <= 2.1e-6


def test_rk4_overflow_raises():
    sys = linear_system(np.array([[-1e200]]))
    with pytest.raises(DomainError):
        integrate_fixed(sys, np.array([1.0]), 10.0, 10, step_rk4_explicit)


@given(st.floats(0, 1e4), st.floats(math.pi / 2, 3 * math.pi / 2))
def test_gauss_matches_pade(r, theta):
    z = r * complex(math.cos(theta), math.sin(theta))
    u, _ = step_irk4_gauss(scalar(z), np.array([1.0 + 0j]), 1.0)
    want = gauss2_amplification(z)
    assert abs(u[0] - want) <= 1e-12 * max(1, abs(want))


@given(st.floats(-1e6, 1e6))
def test_pade_unit_modulus_on_axis(y):
    assert abs(gauss2_amplification(1j * y)) == pytest.approx(1, abs=1e-12)


def test_pade_not_l_stable_but_tsfo_is():
    assert abs(gauss2_amplification(-1e12)) == pytest.approx(1, abs=1e-9)
    assert abs(amplification_g(-1e12, AmplificationParams())) < 1e-6


def test_gauss_affine_one_iteration():
    pr = linear_separated()
    _, iters = step_irk4_gauss(pr.system, np.array([0.2, 0.4]), 0.5)
    assert iters == 1


def test_gauss_linear_table_value():
    pr = linear_separated(LONGDOUBLE)
    u = integrate_fixed(pr.system, pr.u0, 10.0, 320, step_irk4_gauss)
    err = float(np.sqrt(np.sum((u - pr.exact(10.0)) ** 2)))
    assert err == pytest.approx(6.013786673943e-13, rel=1e-3)


def test_integrate_fixed_single_step_and_split():
    pr = linear_separated()
    stepper = lambda s, u, dt: step_implicit_tsfo(s, u, dt)
    one = integrate_fixed(pr.system, pr.u0, 1.0, 1, stepper)
    direct, _ = step_implicit_tsfo(pr.system, pr.u0, 1.0)
    assert one.tobytes() == direct.tobytes()
    full = integrate_fixed(pr.system, pr.u0, 10.0, 10, stepper)
    mid = integrate_fixed(pr.system, pr.u0, 5.0, 5, stepper)
    rest = integrate_fixed(pr.system, mid, 5.0, 5, stepper)
    assert full.tobytes() == rest.tobytes()


def test_integrate_fixed_table_row():
    pr = linear_separated()
    iters = []
    u = integrate_fixed(pr.system, pr.u0, 10.0, 10, lambda s, u, dt: step_implicit_tsfo(s, u, dt), iters)
    assert len(iters) == 10
    assert np.linalg.norm(u - pr.exact(10.0)) == pytest.approx(6.697969115862e-08, rel=1e-3)


def test_integrate_fixed_reports_step_index():
    pr = robertson()
    with pytest.raises(StiffStepError) as info:
        integrate_fixed(pr.system, pr.u0, 10.0, 1000, step_rk4_explicit)
    assert info.value.step_index is not None and info.value.step_index < 10
    assert "step" in str(info.value)
    with pytest.raises(ValueError):
        integrate_fixed(pr.system, pr.u0, 10.0, 0, step_rk4_explicit)


def test_compensated_paths_agree():
    pr = robertson()
    fast, bad = run_rk4_reference(pr.fast_rhs, pr.u0, 1e-4, 2000)
    slow = rk4_compensated(pr.system, pr.u0, 1e-4, 2000)
    assert bad == -1
    assert np.max(np.abs(fast - slow)) < 1e-15


def test_kernel_flags_overflow():
    pr = robertson()
    _, bad = run_rk4_reference(pr.fast_rhs, pr.u0, 1e-2, 100)
    assert 0 <= bad < 10
