import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bunchkit.empirical_dist import GRID_TOL, EmpiricalCDF, as_hours, bunching_mass, ecdf, histogram
from bunchkit.errors import EstimationError


def test_ecdf_examples():
    F = ecdf([1, 2, 3])
    assert F(2) == pytest.approx(2 / 3)
    assert F(1.5) == pytest.approx(1 / 3)
    assert F(0.5) == 0.0
    assert F(3) == 1.0
    assert ecdf([5, 5, 5])(5) == 1.0
    assert F.left_limit(2) == pytest.approx(1 / 3)


def test_ecdf_errors():
    with pytest.raises(EstimationError):
        ecdf([])
    with pytest.raises(EstimationError):
        ecdf([1.0, np.nan])
    with pytest.raises(EstimationError):
        EmpiricalCDF([1, 2], weights=[1, -1])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 400), min_size=1, max_size=60), st.floats(-10, 60))
def test_ecdf_counts_are_integers(vals, x):
    h = np.array(vals) / 8
    F = ecdf(h)
    assert F(x) * F.n == pytest.approx(round(F(x) * F.n), abs=1e-9)
    assert F(x) == np.mean(h <= x)
    assert 0 <= F.left_limit(x) <= F(x) <= 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(300, 340), min_size=1, max_size=60))
def test_bunching_is_jump_of_ecdf(vals):
    h = np.array(vals) / 8
    F = ecdf(h)
    b = bunching_mass(h, 40.0)
    assert b.mass == pytest.approx(F(40.0) - F.left_limit(40.0), abs=1e-12)
    assert b.mass == pytest.approx(F.left_limit(40 + GRID_TOL) - F(40 - GRID_TOL), abs=1e-12)
    assert b.mass == b.n_at_k / b.n_total


def test_bunching_examples():
    h = np.r_[np.full(116, 40.0), np.linspace(30, 39, 884)]
    assert bunching_mass(h, 40).mass == pytest.approx(0.116)
    assert bunching_mass(np.array([30.0, 41.0]), 40).mass == 0.0
    # conditional variant on rows with PTO
    pto = np.zeros(1000, dtype=bool)
    pto[:1000] = True
    h2 = np.r_[np.full(27, 40.0), np.full(973, 32.0)]
    assert bunching_mass(h2, 40, mask=pto).mass == pytest.approx(0.027)


def test_weighted_ecdf_matches_replication():
    rng = np.random.default_rng(0)
    h = rng.integers(300, 340, 50) / 8
    w = rng.integers(0, 4, 50)
    F = EmpiricalCDF(h).reweight(w)
    G = ecdf(np.repeat(h, w))
    for x in np.linspace(37, 43, 25):
        assert F(x) == pytest.approx(G(x), abs=1e-12)
        assert F.left_limit(x) == pytest.approx(G.left_limit(x), abs=1e-12)


def test_transformed_keeps_order():
    F = ecdf([1.0, 4.0, 9.0])
    L = F.transformed(np.sqrt)
    assert L(2.0) == pytest.approx(2 / 3)


def test_as_hours_frame():
    import pandas as pd
    assert as_hours(pd.DataFrame({"hours_worked": [1, 2]})).tolist() == [1.0, 2.0]


def test_histogram_single_bin_and_alignment():
    hist = histogram(np.full(10, 40.0), 0.125, k=40, align="center")
    assert (hist["count"] > 0).sum() == 1
    assert hist["share"].sum() == pytest.approx(1.0)
    row = hist[hist["count"] > 0].iloc[0]
    assert row.bin_left < 40 < row.bin_right
    edge = histogram(np.array([39.0, 41.0]), 1.0, k=40, align="boundary")
    assert 40.0 in set(edge["bin_left"])


def test_histogram_uniform_near_equal():
    h = np.arange(0, 10, 0.01)
    hist = histogram(h, 1.0, range=(0, 9.999), k=0)
    assert hist["count"].max() - hist["count"].min() <= 1


def test_histogram_errors():
    with pytest.raises(ValueError):
        histogram([1.0], 0)
    with pytest.raises(ValueError):
        histogram([1.0], 1, align="middle")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 80, allow_nan=False), min_size=1, max_size=80),
       st.sampled_from([0.125, 0.25, 1.0, 3.0]), st.sampled_from(["boundary", "center"]))
def test_histogram_conserves_mass(vals, width, align):
    hist = histogram(np.array(vals), width, k=40, align=align)
    assert hist["count"].sum() == len(vals)
    assert np.allclose(hist["bin_right"] - hist["bin_left"], width)
