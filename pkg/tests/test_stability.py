import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from stiffstep.errors import PoleEvaluation
from stiffstep.order_conditions import DEFAULT_C, stage2_exact
from stiffstep.stability import (
    AmplificationParams,
    SCAN_TOL,
    amplification_g,
    amplification_g_reduced,
    amplification_r,
    g_infinity,
    max_abs_g_on_axis,
    pole_analysis,
    scan_a_stability,
    series_coefficients,
    taylor_defect,
    taylor_defect_from_coefficients,
)

param = st.floats(-0.5, 0.5, allow_nan=False)
left_z = st.builds(
    lambda r, t: r * complex(math.cos(t), math.sin(t)), st.floats(0, 1e3), st.floats(math.pi / 2, 3 * math.pi / 2)
)


def test_r_basics():
    assert amplification_r(0) == 1
    for y in (0.1, 1, 10, 1000):
        assert abs(abs(amplification_r(1j * y)) - 1) <= 1e-14
    with pytest.raises(PoleEvaluation):
        amplification_r(6 + 2j * math.sqrt(3))


def test_r_poles():
    roots = np.roots([1 / 48, -1 / 4, 1])
    assert sorted(roots, key=lambda r: r.imag) == pytest.approx([6 - 2j * math.sqrt(3), 6 + 2j * math.sqrt(3)])


def test_g_at_origin():
    for p in (AmplificationParams(), AmplificationParams(0.1, 0.3), AmplificationParams(-0.2, 0)):
        assert amplification_g(0, p) == 1


def test_g_limits():
    assert abs(amplification_g(-1e9, AmplificationParams(0.03, -0.03))) < 1e-7
    assert abs(amplification_g(-1e9, AmplificationParams(0.03, 0.0)) - 1) < 1e-6
    assert g_infinity(AmplificationParams(0.03, -0.03)) == 0
    assert g_infinity(AmplificationParams(0.03, 0.0)) == 1
    c, d = 0.02, 0.01
    assert g_infinity(AmplificationParams(c, d)) == pytest.approx((c + d) / (c - d / 2), rel=1e-12)


def test_general_vs_reduced(rng):
    r = rng.uniform(0, 50, 100)
    th = rng.uniform(math.pi / 2, 3 * math.pi / 2, 100)
    z = r * np.exp(1j * th)
    diff = np.abs(amplification_g(z, AmplificationParams(0.03, -0.03)) - amplification_g_reduced(z, 0.03))
    assert diff.max() <= 1e-13


@given(left_z, param, param)
def test_conjugate_symmetry(z, c, d):
    p = AmplificationParams(c, d)
    try:
        a = amplification_g(z, p)
        b = amplification_g(z.conjugate(), p)
    except PoleEvaluation:
        return
    assert abs(a.conjugate() - b) <= 1e-12 * max(1, abs(a))


def test_l_stability_rays():
    for ang in (math.pi, 3 * math.pi / 4, 5 * math.pi / 4):
        assert abs(amplification_g(1e12 * complex(math.cos(ang), math.sin(ang)))) <= 1e-6


@given(param, param)
def test_fourth_order_for_all_parameters(c, d):
    defect = taylor_defect(AmplificationParams(c, d), 4)
    assert max(defect) <= 1e-12


def test_not_fifth_order_at_default():
    assert taylor_defect(AmplificationParams(), 5)[5] > 1e-6


def test_series_against_sympy():
    z = sympy.symbols("z")
    c = sympy.Rational(3, 100)
    a3, a4, a5, b3, b4, b5 = (sympy.Rational(x.numerator, x.denominator) for x in stage2_exact(Fraction(3, 100), Fraction(-3, 100)))
    R = (1 + z / 4 + z**2 / 48) / (1 - z / 4 + z**2 / 48)
    G = (1 + z * (a3 + a4 * R) + z**2 * (b3 + b4 * R)) / (1 - a5 * z - b5 * z**2)
    ser = sympy.series(G, z, 0, 7).removeO()
    ours = series_coefficients(AmplificationParams(Fraction(3, 100), Fraction(-3, 100)), 6)
    for k in range(7):
        want = ser.coeff(z, k)
        assert Fraction(int(want.p), int(want.q)) == ours[k]


def test_defect_detects_wrong_coefficient():
    coefs = list(stage2_exact(DEFAULT_C, -DEFAULT_C))
    assert max(taylor_defect_from_coefficients(coefs, 4)) == 0
    coefs[1] += Fraction(1, 1000)
    bad = taylor_defect_from_coefficients(coefs, 4)
    assert bad[1] == pytest.approx(1e-3, rel=1e-12)
    assert 1e-4 < bad[2] < 1e-3


def test_defect_order_limit():
    with pytest.raises(ValueError):
        taylor_defect(AmplificationParams(), 9)


def test_pole_analysis_examples():
    ok, re = pole_analysis(0.0)
    assert ok and re[0] == pytest.approx(6)
    ok, re = pole_analysis(-0.02)
    assert not ok
    assert min(re) < 0
    assert pole_analysis(0.03)[0]


@given(st.floats(-1 / 39, 1.0, allow_nan=False))
def test_pole_verdict_matches_closed_criterion(c):
    assert pole_analysis(c)[0] == (c >= 0)


@given(st.floats(-10, -1 / 39 - 1e-9, allow_nan=False))
def test_negative_c_always_has_left_pole(c):
    # roots of 1 - (1/6 + 13C/2) z + (3C/2) z^2 are real with product 2/(3C) < 0
    ok, re = pole_analysis(c)
    assert not ok
    assert min(re) < 0 < max(re)


def test_counterexample_below_minus_one_39th():
    ok, re = pole_analysis(-0.1)
    assert not ok
    assert sorted(re[:2]) == pytest.approx([-1.4322990944, 4.6545213166], rel=1e-9)


def test_scan_small_grid_and_validation():
    res = scan_a_stability(0.0, 0.1, 51, 1e-4, 1e4, 2000)
    assert len(res.c_values) == len(res.max_abs_g) == len(res.valid_mask) == 51
    lo, hi = res.valid_interval
    assert lo in res.c_values and hi in res.c_values
    assert 0.016 <= lo <= 0.022 and 0.042 <= hi <= 0.048
    with pytest.raises(ValueError):
        scan_a_stability(0.1, 0.0, 10, 1e-3, 1, 10)
    with pytest.raises(ValueError):
        scan_a_stability(0, 0.1, 1, 1e-3, 1, 10)
    with pytest.raises(ValueError):
        scan_a_stability(0, 0.1, 10, 1.0, 1e-3, 10)


def test_scan_degenerate_grid():
    res = scan_a_stability(0.0, 0.1, 2, 1e-8, 1e4, 10)
    assert res.valid_interval is None


def test_scan_parallel_matches_serial():
    a = scan_a_stability(0.015, 0.05, 40, 1e-3, 1e3, 500)
    b = scan_a_stability(0.015, 0.05, 40, 1e-3, 1e3, 500, workers=2)
    assert np.array_equal(a.max_abs_g, b.max_abs_g)
    assert a.valid_interval == b.valid_interval


def test_valid_interval_holds_on_finer_y_grid():
    res = scan_a_stability(0.0, 0.1, 200, 1e-8, 1e4, 5000)
    lo, hi = res.valid_interval
    y = np.logspace(-8, 4, 20000)
    for c in res.c_values[(res.c_values >= lo) & (res.c_values <= hi)]:
        assert max_abs_g_on_axis(c, y) <= 1 + SCAN_TOL


def test_strict_interval_is_nested():
    res = scan_a_stability(0.0, 0.1, 400, 1e-8, 1e4, 5000)
    lo, hi = res.valid_interval
    slo, shi = res.interval_at(1e-12)
    assert lo <= slo <= shi <= hi
