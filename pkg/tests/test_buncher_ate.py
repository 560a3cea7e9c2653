import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bunchkit.boundary_density import KinkEstimates
from bunchkit.buncher_ate import (AteInputs, BoundInterval, ate_to_elasticity, buncher_ate_bounds, g_fn,
                                  isoelastic_blc_bounds, saez_from_estimates, saez_linear_epsilon,
                                  small_kink_approx)
from bunchkit.errors import DomainError, FeasibilityError, PreconditionError
from oracles import (ATE_EXAMPLE_BOUNDS, G_EXAMPLE, SMALL_KINK_EXAMPLE, ate_bounds_quadrature, g_quadrature)


def inputs(F_minus, f0, F_plus, f1, p):
    return AteInputs.from_estimates(KinkEstimates(40.0, F_minus, F_plus, f0, f1, 2.0, 100, 100), p)


def test_g_example():
    args, value = G_EXAMPLE
    assert g_fn(*args) == pytest.approx(value, abs=1e-10)
    assert g_fn(*args) == pytest.approx(g_quadrature(*args), rel=1e-10)


def test_g_series_matches_closed_form_at_switch():
    a, b = 0.7, 0.05
    for x in (9.9e-7 * a, -9.9e-7 * a, 1.01e-6 * a):
        y = x / a
        series = (a / b) * y * (0.5 - y / 6 + y * y / 12 - y ** 3 / 20)
        closed = (a / b) * ((1 + y) * math.log1p(y) / y - 1)
        assert series == pytest.approx(closed, rel=1e-9)
        assert g_fn(a, b, x) == pytest.approx(closed, rel=1e-9)


def test_g_first_order_and_zero_limit():
    assert g_fn(0.5, 2.0, 0.0) == 0.0
    x = 1e-9
    assert g_fn(0.5, 2.0, x) == pytest.approx(x / (2 * 2.0), rel=1e-8)


def test_g_domain():
    with pytest.raises(DomainError):
        g_fn(0.0, 1.0, 0.1)
    with pytest.raises(DomainError):
        g_fn(0.5, -1.0, 0.1)
    with pytest.raises(DomainError):
        g_fn(0.5, 1.0, -0.5)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 10), st.floats(1e-3, 10), st.floats(-0.99, 5), st.floats(1e-3, 1e3))
def test_g_sign_and_homogeneity(a, b, r, lam):
    x = r * a
    g = g_fn(a, b, x)
    if x > 1e-300:
        assert g > 0
    elif x < -1e-300:
        assert g < 0
    assert g_fn(lam * a, lam * b, lam * x) == pytest.approx(g, rel=1e-9, abs=1e-12)


def test_ate_example_bounds():
    inp = inputs(0.55, 0.05, 0.666, 0.05, 0.089)
    assert inp.F0 == pytest.approx(0.639)
    b = buncher_ate_bounds(inp)
    assert (b.lower, b.upper) == pytest.approx(ATE_EXAMPLE_BOUNDS, abs=1e-9)
    assert small_kink_approx(inp) == pytest.approx(SMALL_KINK_EXAMPLE)
    assert b.contains(small_kink_approx(inp))


def test_ate_matches_quadrature_random():
    rng = np.random.default_rng(0)
    from oracles import random_feasible_inputs
    for args in random_feasible_inputs(rng, 25):
        b = buncher_ate_bounds(inputs(*args))
        lo, hi = ate_bounds_quadrature(*args)
        assert b.lower == pytest.approx(lo, rel=1e-8)
        assert b.upper == pytest.approx(hi, rel=1e-8)


def test_zero_net_bunching():
    inp = inputs(0.5, 0.05, 0.6, 0.05, 0.1)
    assert buncher_ate_bounds(inp) == BoundInterval(0.0, 0.0)
    assert small_kink_approx(inp) == 0.0


@pytest.mark.parametrize("args,name", [
    ((0.5, 0.05, 0.999999, 0.05, 0.0), None),
    ((0.5, 0.05, 1.0, 0.05, 0.0), "1-F1"),
    ((0.5, 0.0, 0.6, 0.05, 0.0), "f0"),
    ((0.5, 0.05, 0.6, -0.1, 0.0), "f1"),
])
def test_feasibility_errors_name_argument(args, name):
    if name is None:
        buncher_ate_bounds(inputs(*args))
        return
    with pytest.raises(FeasibilityError) as exc:
        buncher_ate_bounds(inputs(*args))
    assert exc.value.argument == name


def test_feasibility_F0_minus_p():
    inp = AteInputs(KinkEstimates(40.0, 0.0, 0.2, 0.05, 0.05, 2.0, 1, 1), 0.2, 0.1)
    with pytest.raises(FeasibilityError) as exc:
        buncher_ate_bounds(inp)
    assert exc.value.argument == "F0-p"


def test_p_above_B_is_precondition_error():
    with pytest.raises(PreconditionError):
        inputs(0.5, 0.05, 0.6, 0.05, 0.2)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 0.8), st.floats(0.005, 0.3), st.floats(0, 0.9), st.floats(0.01, 0.3), st.floats(0.01, 0.3))
def test_bounds_ordered_positive_renormalized(F_minus, B, frac, f0, f1):
    assume(F_minus + B < 0.97)
    p = frac * B
    b = buncher_ate_bounds(inputs(F_minus, f0, F_minus + B, f1, p))
    assert 0 <= b.lower <= b.upper
    # dropping counterfactual bunchers and renormalizing by 1 - p leaves the bounds unchanged
    s = 1 - p
    r = buncher_ate_bounds(inputs(F_minus / s, f0 / s, (F_minus + B - p) / s, f1 / s, 0.0))
    assert r.lower == pytest.approx(b.lower, rel=1e-9)
    assert r.upper == pytest.approx(b.upper, rel=1e-9)


def test_width_shrinks_faster_than_net_bunching():
    ratios = []
    for x in (1e-2, 1e-3, 1e-4):
        b = buncher_ate_bounds(inputs(0.5, 0.05, 0.5 + x, 0.04, 0.0))
        ratios.append(b.width / x)
    assert ratios[0] > ratios[1] > ratios[2]


def test_elasticity_conversion():
    assert ate_to_elasticity(0.667, 40) == pytest.approx(0.0411, abs=1e-4)
    assert ate_to_elasticity(2.6, 40) == pytest.approx(0.160, abs=1e-3)
    assert ate_to_elasticity(0.0, 40) == 0.0
    with pytest.raises(ValueError):
        ate_to_elasticity(1.0, 0)


def test_saez_rectangle_case():
    est = KinkEstimates(math.log(40), 0.5, 0.6, 2.0, 2.0, 0.05, 10, 10)
    assert saez_from_estimates(est, 0.0) == pytest.approx(0.1 / 2.0)
    assert saez_from_estimates(est, 0.1) == 0.0


def test_log_benchmarks_on_uniform_log_data():
    # ln h0 uniform; shift by eps ln 1.5 above the kink and bunch the straddlers
    eps = 0.17
    u = np.linspace(math.log(30), math.log(55), 200_001)[1:-1]
    h0 = np.exp(u)
    h1 = h0 * 1.5 ** -eps
    h = np.where(h0 < 40, h0, np.where(h1 > 40, h1, 40.0))
    assert saez_linear_epsilon(h, 40, 0, tol=1e-9) == pytest.approx(eps, rel=1e-3)
    iso = isoelastic_blc_bounds(h, 40, 0, tol=1e-9)
    assert iso.contains(eps)
    assert iso.units == "elasticity"


def test_log_benchmarks_zero_net_bunching():
    h = np.r_[np.linspace(30, 39, 500), np.full(50, 40.0), np.linspace(41, 50, 500)]
    assert isoelastic_blc_bounds(h, 40, 50 / 1050) == BoundInterval(0.0, 0.0, "elasticity")


def test_bound_interval_algebra():
    a = BoundInterval(1.0, 2.0)
    b = BoundInterval(-1.0, 0.5)
    assert (a + b) == BoundInterval(0.0, 2.5)
    assert a.negated() == BoundInterval(-2.0, -1.0)
    assert a.scaled(-1.0) == BoundInterval(-2.0, -1.0)
    with pytest.raises(ValueError):
        BoundInterval(2.0, 1.0)
    with pytest.raises(ValueError):
        BoundInterval(0.0, 1.0, "dollars")
