import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bunchkit.errors import EstimationError
from bunchkit.inference import (BootstrapResult, ImCi, cluster_bootstrap, firm_multiplicities,
                                im_confidence_interval, im_critical_value, normal_cdf, replicate_rng,
                                se_from_replicates)
from bunchkit.paycheck_data import load_paychecks
from conftest import csv_bytes

Z95, Z90 = 1.959963984540054, 1.6448536269514722


def _table(n_firms=6, rows_per_firm=(1, 2, 3, 4, 5, 6)):
    rows = []
    for j in range(n_firms):
        for i in range(rows_per_firm[j]):
            rows.append(f"w{j}_{i},f{j},1,20,{30 + j + i / 10},0,0,0,0,weekly,hourly")
    return load_paychecks(csv_bytes(rows), snap=False)


def test_critical_value_limits():
    assert im_critical_value(0.0, 0.05) == pytest.approx(Z95, abs=1e-6)
    assert im_critical_value(math.inf, 0.05) == pytest.approx(Z90, abs=1e-12)
    assert im_critical_value(50.0, 0.05) == pytest.approx(Z90, abs=1e-6)


def test_critical_value_solves_equation():
    for w in (0.1, 0.5, 1.0, 2.0):
        c = im_critical_value(w, 0.05)
        assert normal_cdf(c + w) - normal_cdf(-c) == pytest.approx(0.95, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 20), st.floats(0.01, 5))
def test_critical_value_monotone(w, dw):
    a, b = im_critical_value(w, 0.05), im_critical_value(w + dw, 0.05)
    assert Z90 - 1e-6 <= b <= a + 1e-6 <= Z95 + 2e-6


def test_normal_cdf():
    assert normal_cdf(0) == 0.5
    assert normal_cdf(Z95) == pytest.approx(0.975, abs=1e-12)


def test_point_identified_interval():
    ci = im_confidence_interval(1.0, 1.0, 0.1, 0.1)
    assert (ci.lower, ci.upper) == pytest.approx((1 - Z95 * 0.1, 1 + Z95 * 0.1), abs=1e-6)


def test_wide_interval_one_sided():
    ci = im_confidence_interval(0.0, 10.0, 0.1, 0.2)
    assert ci.lower == pytest.approx(-Z90 * 0.1, abs=1e-6)
    assert ci.upper == pytest.approx(10 + Z90 * 0.2, abs=1e-6)


def test_zero_se_returns_identified_set():
    ci = im_confidence_interval(0.2, 0.3, 0.0, 0.0)
    assert (ci.lower, ci.upper) == (0.2, 0.3)


def test_swap_warns():
    with pytest.warns(UserWarning, match="swapping"):
        ci = im_confidence_interval(0.3, 0.2, 0.01, 0.02)
    assert ci.lower < 0.2 and ci.upper > 0.3


def test_im_validation():
    with pytest.raises(ValueError):
        im_confidence_interval(0, 1, -0.1, 0.1)
    with pytest.raises(ValueError):
        im_critical_value(1.0, 1.5)
    with pytest.raises(ValueError):
        ImCi(0.05, 1.0, 0.0, 1.9)


def test_se_from_replicates():
    res = BootstrapResult(({"x": 0.0}, {"x": 2.0}), 2, 0, 0)
    assert se_from_replicates(res, "x") == pytest.approx(math.sqrt(2))
    with pytest.raises(EstimationError):
        se_from_replicates(BootstrapResult(({"x": 0.0},), 2, 0, 1), "x")
    with pytest.raises(ValueError):
        BootstrapResult(({"x": 0.0},), 3, 0, 1)


def test_replicate_rng_independent_of_order():
    a = replicate_rng(5, 3).integers(0, 100, 10)
    replicate_rng(5, 2).integers(0, 100, 10)
    assert np.array_equal(a, replicate_rng(5, 3).integers(0, 100, 10))
    assert not np.array_equal(a, replicate_rng(5, 4).integers(0, 100, 10))


def test_multiplicities_sum():
    m = firm_multiplicities(7, np.random.default_rng(0))
    assert m.sum() == 7 and m.size == 7


def test_replicate_sizes_are_sums_of_firm_sizes():
    t = _table()
    sizes = {f"f{j}": j + 1 for j in range(6)}
    res = cluster_bootstrap(t, lambda tb: {"n": len(tb), "firms": tuple(tb.frame["firm_id"])}, 30, seed=1)
    for rec in res.replicates:
        counts = {}
        for f in rec["firms"]:
            counts[f] = counts.get(f, 0) + 1
        # each drawn firm contributes a whole number of copies of its rows
        for f, c in counts.items():
            assert c % sizes[f] == 0
        assert sum(c // sizes[f] for f, c in counts.items()) == 6


def test_weighted_equals_concatenated():
    t = _table()
    h = t.hours
    a = cluster_bootstrap(t, lambda tb: {"m": tb.hours.mean()}, 25, seed=3)
    b = cluster_bootstrap(t, lambda w: {"m": float(np.sum(w * h) / w.sum())}, 25, seed=3, weighted=True)
    assert np.allclose(a.values("m"), b.values("m"), rtol=1e-12)


def test_deterministic_and_thread_invariant():
    t = _table()
    stat = lambda tb: {"m": tb.hours.mean()}  # noqa: E731
    a = cluster_bootstrap(t, stat, 40, seed=9)
    b = cluster_bootstrap(t, stat, 40, seed=9, threads=4)
    assert np.array_equal(a.values("m"), b.values("m"))
    c = cluster_bootstrap(t, stat, 40, seed=10)
    assert not np.array_equal(a.values("m"), c.values("m"))


def test_failed_replicates_counted():
    t = _table()

    def stat(tb):
        if "f0" not in set(tb.frame["firm_id"]):
            raise EstimationError("firm f0 missing")
        return {"m": 1.0}

    res = cluster_bootstrap(t, stat, 50, seed=2)
    assert res.failed_reps > 0
    assert len(res.replicates) + res.failed_reps == 50
    assert all("f0 missing" in f for f in res.failures)


def test_non_library_errors_propagate():
    t = _table()
    with pytest.raises(ZeroDivisionError):
        cluster_bootstrap(t, lambda tb: 1 / 0, 3, seed=0)


def test_bootstrap_guards():
    with pytest.raises(ValueError):
        cluster_bootstrap(_table(), lambda tb: {}, 0, seed=0)
    with pytest.raises(EstimationError):
        cluster_bootstrap(_table(1, (3,)), lambda tb: {}, 5, seed=0)


def test_cluster_se_larger_than_iid_with_firm_effects():
    rng = np.random.default_rng(0)
    rows = []
    for j in range(40):
        fe = rng.normal(0, 3)
        for i in range(20):
            rows.append(f"w{j}_{i},f{j},1,20,{35 + fe + rng.normal()},0,0,0,0,weekly,hourly")
    t = load_paychecks(csv_bytes(rows), snap=False)
    res = cluster_bootstrap(t, lambda tb: {"m": tb.hours.mean()}, 200, seed=4)
    iid = t.hours.std(ddof=1) / math.sqrt(len(t))
    assert se_from_replicates(res, "m") > 2 * iid
