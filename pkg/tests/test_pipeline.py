import numpy as np
import pytest

from bunchkit.boundary_density import kink_estimates
from bunchkit.buncher_ate import AteInputs, buncher_ate_bounds
from bunchkit.empirical_dist import EmpiricalCDF
from bunchkit.errors import EstimationError
from bunchkit.pipeline import (EstimateConfig, MethodResult, estimate_table, group_tables, point_estimates,
                               policy_analysis)
from bunchkit.simulator import oracle_buncher_ate, oracle_p


def _cfg(**kw):
    base = dict(tol=1e-9)
    base.update(kw)
    return EstimateConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        EstimateConfig(p_methods=("guess",))
    assert EstimateConfig().to_dict()["p_methods"] == ["fixed"]


def test_point_estimates_consistent(small_sim):
    _, table, latent = small_sim
    cfg = _cfg(p_methods=("fixed",), p_value=oracle_p(latent, 40))
    res = estimate_table(table, cfg)["fixed"]
    pt = res.point
    assert pt["net_bunching"] == pytest.approx(pt["B"] - pt["p"])
    assert pt["ate_lower"] <= pt["small_kink"] <= pt["ate_upper"]
    conv = 40 * np.log(1.5)
    assert pt["elasticity_lower"] == pytest.approx(pt["ate_lower"] / conv)
    assert pt["iso_elasticity_lower"] <= pt["iso_elasticity_upper"]
    est = kink_estimates(table, 40, cfg.p_value, bandwidth=pt["bandwidth"], tol=1e-9)
    ate = buncher_ate_bounds(AteInputs.from_estimates(est, cfg.p_value))
    assert (pt["ate_lower"], pt["ate_upper"]) == pytest.approx((ate.lower, ate.upper))
    assert pt["ate_lower"] <= oracle_buncher_ate(latent, 40) <= pt["ate_upper"]


def test_reported_elasticities_negative(small_sim):
    _, table, latent = small_sim
    d = estimate_table(table, _cfg(p_value=oracle_p(latent, 40)))["fixed"].to_dict()
    e = d["estimates"]
    assert e["elasticity_lower"] <= e["elasticity_upper"] <= 0
    assert e["saez_epsilon"] < 0
    assert e["ate_lower"] > 0


def test_three_methods_side_by_side(small_sim):
    _, table, _ = small_sim
    out = estimate_table(table, _cfg(p_methods=("fixed", "pto", "nonchanger_upper")))
    assert set(out) == {"fixed", "pto", "nonchanger_upper"}
    assert all(isinstance(v, MethodResult) for v in out.values())
    assert out["nonchanger_upper"].p.is_upper_bound


def test_failing_method_reported_not_raised(small_sim):
    _, table, _ = small_sim
    t = table.take(np.arange(len(table)))
    t.frame.drop(columns=["pto_hours"], inplace=True)
    out = estimate_table(t, _cfg(p_methods=("fixed", "pto")))
    assert isinstance(out["fixed"], MethodResult)
    assert isinstance(out["pto"], str) and "pto" in out["pto"].lower()
    with pytest.raises(EstimationError):
        estimate_table(t, _cfg(p_methods=("pto",)))


def test_bootstrap_inference_block(small_sim):
    _, table, latent = small_sim
    cfg = _cfg(p_methods=("fixed", "pto"), p_value=oracle_p(latent, 40))
    out = estimate_table(table, cfg, n_reps=20, seed=5)
    inf = out["fixed"].inference
    assert inf["n_reps"] == 20 and inf["n_failed_reps"] == 0
    assert inf["se_B"] > 0
    ate = inf["ate"]
    pt = out["fixed"].point
    assert ate["ci_lower"] <= pt["ate_lower"] and ate["ci_upper"] >= pt["ate_upper"]
    el = inf["elasticity"]
    assert el["ci_lower"] <= -pt["elasticity_upper"] and el["ci_upper"] >= -pt["elasticity_lower"]
    again = estimate_table(table, cfg, n_reps=20, seed=5, threads=3)
    assert again["pto"].inference == out["pto"].inference


def test_point_estimates_accept_weights(small_sim):
    _, table, _ = small_sim
    F = EmpiricalCDF(table.hours)
    w = np.ones(len(table))
    cfg = _cfg()
    a = point_estimates(F, 0.0, cfg, 2.0, 0.05)
    b = point_estimates(F.reweight(w), 0.0, cfg, 2.0, 0.05)
    assert a == pytest.approx(b)


def test_policy_analysis(small_sim):
    _, table, latent = small_sim
    cfg = _cfg()
    report, dt, est, curve = policy_analysis(table, cfg, oracle_p(latent, 40))
    assert report.total_theta.upper <= 0
    assert dt.upper <= 0
    ks = [row[0] for row in curve]
    assert ks == sorted(ks) and 40.0 in ks
    row40 = curve[ks.index(40.0)]
    assert row40[1] == pytest.approx(est.B - est.p) and row40[3] == 0.0


def test_group_tables_partition(small_sim):
    _, table, _ = small_sim
    t = table.take(np.arange(len(table)))
    t.frame["tag"] = np.where(t.frame["firm_id"].str[-1].isin(list("01234")), "a", "b")
    groups = group_tables(t, "tag")
    assert list(groups) == ["a", "b"]
    assert sum(len(g) for g in groups.values()) == len(t)
    with pytest.raises(EstimationError):
        group_tables(t, "industry")
