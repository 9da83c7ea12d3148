import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from stiffstep.baselines import integrate_fixed
from stiffstep.harness import run_fixed
from stiffstep.linalg import LONGDOUBLE, mp_precision
from stiffstep.model import g_jacobian_fd_error, jacobian_fd_error
from stiffstep.problems import (
    PROBLEMS,
    get_problem,
    linear_separated,
    ozone,
    robertson,
    van_der_pol,
)
from stiffstep.tsfo import step_implicit_tsfo


def trajectory_states(problem, t_end, n, count=20):
    states = []
    every = max(1, n // count)
    run_fixed(problem, "tsfo-implicit", t_end, n,
              on_step=lambda i, u: states.append(u.copy()) if i % every == 0 else None)
    return states[:count]


@pytest.mark.parametrize(
    "name,t_end,n",
    [("linear", 10.0, 40), ("robertson", 10.0, 200), ("ozone", 1.0, 40), ("vdp", 1.0, 200)],
)
def test_jacobians_along_trajectory(name, t_end, n):
    pr = get_problem(name)
    states = trajectory_states(pr, t_end, n)
    assert len(states) == 20
    for u in states:
        # G is cubic in u, so central differences need a small step on Robertson
        assert jacobian_fd_error(pr.system, u) < 1e-6
        assert g_jacobian_fd_error(pr.system, u, h=1e-8) < 1e-6


def test_linear_problem():
    pr = linear_separated()
    assert np.array_equal(pr.exact(0.0), [0, 0])
    assert pr.t_end_options == (10.0,)
    assert np.allclose(pr.exact(1e3), [0.001, 1.0], rtol=1e-15)
    J = pr.system.jac(pr.u0)
    assert sorted(np.linalg.eigvals(J)) == [-1000, -1]
    assert not pr.system.second_contraction(pr.u0, pr.u0).any()
    assert pr.exact(10.0)[1] == pytest.approx(1 - math.exp(-10), rel=1e-15)


def test_robertson_problem():
    pr = robertson()
    sys = pr.system
    assert np.array_equal(pr.u0, [1, 0, 0])
    assert np.allclose(sys.rhs(pr.u0), [-0.04, 0.04, 0], rtol=0, atol=1e-18)
    assert np.allclose(sys.jac(pr.u0), [[-0.04, 0, 0], [0.04, 0, 0], [0, 0, 0]], rtol=0, atol=0)
    assert pr.default_t_end == 10.0


@given(arrays(np.float64, 3, elements=st.floats(0, 1)))
def test_robertson_mass_conservation(u):
    f = robertson().system.rhs(u)
    assert abs(f.sum()) <= 1e-12 * (1 + 3e7 * u[1] ** 2 + 1e4 * abs(u[1] * u[2]))


def test_robertson_conservation_along_run():
    pr = robertson()
    u = run_fixed(pr, "tsfo-implicit", 10.0, 1000)
    assert abs(u.sum() - 1) <= 1e-10


def test_ozone_problem():
    pr = ozone()
    sys = pr.system
    assert sys.dim == 8
    assert pr.t_end_options == (1.0, 10.0, 321.8122)
    assert pr.u0[6] == 0 and pr.u0[7] == 0.0057
    assert sys.rhs(pr.u0)[0] == pytest.approx(-1.7093, rel=1e-14)
    M1 = sys.second_contraction(pr.u0, np.ones(8))
    M2 = sys.second_contraction(np.arange(8.0), np.ones(8))
    assert np.array_equal(M1, M2)
    assert set(zip(*np.nonzero(M1))) <= {(r, c) for r in (5, 6, 7) for c in (5, 7)}


@given(arrays(np.float64, 8, elements=st.floats(-1, 1)))
def test_ozone_last_two_rows_cancel(u):
    f = ozone().system.rhs(u)
    assert abs(f[6] + f[7]) <= 1e-13


def test_van_der_pol_problem():
    pr = van_der_pol()
    sys = pr.system
    assert np.array_equal(sys.rhs(pr.u0), [0, -2])
    assert np.array_equal(sys.jac(pr.u0), [[0, 1], [-1, -300]])
    assert max(abs(np.linalg.eigvals(sys.jac(pr.u0)))) == pytest.approx(300, rel=0.01)
    assert pr.t_end_options == (100.0,)
    assert van_der_pol(nu=5).system.jac(pr.u0)[1, 1] == -15


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_fast_kernels_match_rhs(name, rng):
    pr = get_problem(name)
    for _ in range(5):
        u = rng.uniform(0, 1, pr.system.dim)
        out = np.empty_like(u)
        pr.fast_rhs(u, out)
        assert np.allclose(out, pr.system.rhs(u), rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_extended_precision_problems(name):
    pr = get_problem(name, LONGDOUBLE)
    assert pr.u0.dtype == np.longdouble
    assert pr.system.rhs(pr.u0).dtype == np.longdouble
    assert pr.fast_rhs is None
    mp = get_problem(name, mp_precision(30))
    assert mp.u0.dtype == object
    d = mp.system.rhs(mp.u0) - get_problem(name).system.rhs(get_problem(name).u0)
    assert max(abs(float(x)) for x in d) < 1e-12


def test_linear_error_pipeline_reaches_precision_floor():
    pr = linear_separated()
    u = run_fixed(pr, "tsfo-implicit", 10.0, 2560)
    assert np.linalg.norm(u - pr.exact(10.0)) < 1e-14
    pr = linear_separated(LONGDOUBLE)
    u = run_fixed(pr, "tsfo-implicit", 10.0, 2560)
    assert float(np.sqrt(np.sum((u - pr.exact(10.0)) ** 2))) < 5e-17


def test_unknown_problem():
    with pytest.raises(ValueError):
        get_problem("brusselator")


def test_u0_dimension_checked():
    from stiffstep.problems import BenchmarkProblem

    with pytest.raises(ValueError):
        BenchmarkProblem("x", robertson().system, np.zeros(2), (1.0,))
