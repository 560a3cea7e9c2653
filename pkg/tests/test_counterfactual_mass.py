import warnings

import numpy as np
import pandas as pd
import pytest

from bunchkit.counterfactual_mass import PEstimate, p_fixed, p_from_pto, p_upper_nonchangers
from bunchkit.empirical_dist import bunching_mass
from bunchkit.errors import EstimationError
from bunchkit.paycheck_data import lag_join
from bunchkit.simulator import SimConfig, oracle_p, simulate_isoelastic


def _frame(hours, pto):
    return pd.DataFrame({"hours_worked": np.asarray(hours, float), "pto_hours": np.asarray(pto, float)})


def test_pto_example():
    # 1000 rows, 116 at 40 overall; among 1000 PTO rows... use separate blocks
    no_pto = np.r_[np.full(89 + 27, 40.0), np.full(884, 36.0)]
    with_pto = np.r_[np.full(27, 40.0), np.full(973, 32.0)]
    hours = np.r_[no_pto, with_pto]
    pto = np.r_[np.zeros(1000), np.full(1000, 8.0)]
    df = _frame(hours, pto)
    B = bunching_mass(hours, 40).mass
    est = p_from_pto(df, 40)
    assert est.value == pytest.approx(B - 0.027)
    assert est.method == "pto" and not est.is_upper_bound


def test_pto_zero_when_conditional_equals_B():
    df = _frame([40, 38, 40, 38], [0, 0, 8, 8])
    assert p_from_pto(df, 40).value == 0.0


def test_pto_negative_clipped_with_warning():
    df = _frame([40, 38, 38, 38, 40, 40], [0, 0, 0, 0, 8, 8])
    with pytest.warns(UserWarning, match="clipped"):
        assert p_from_pto(df, 40).value == 0.0


def test_pto_errors():
    with pytest.raises(EstimationError):
        p_from_pto(pd.DataFrame({"hours_worked": [40.0]}), 40)
    with pytest.raises(EstimationError):
        p_from_pto(_frame([40, 41], [0, 0]), 40)


def _panel(hours_by_worker):
    rows = []
    for w, hs in hours_by_worker.items():
        for t, h in enumerate(hs, start=1):
            rows.append({"worker_id": w, "week_index": t, "hours_worked": float(h), "straight_wage": 20.0})
    return rows


def _lagged(hours_by_worker):
    from bunchkit.paycheck_data import CSV_COLUMNS, PaycheckTable
    df = pd.DataFrame(_panel(hours_by_worker))
    df["firm_id"] = "f"
    for c in ("pto_hours", "sick_hours", "holiday_hours", "overtime_hours"):
        df[c] = 0.0
    df["pay_frequency"], df["pay_basis"] = "weekly", "hourly"
    return lag_join(PaycheckTable(df[list(CSV_COLUMNS)]))


def test_nonchangers_none_repeat():
    t = _lagged({"a": [40, 41, 40], "b": [39, 40, 39]})
    est = p_upper_nonchangers(t, 40)
    assert est.value == 0.0 and est.is_upper_bound


def test_nonchangers_everyone_at_k():
    t = _lagged({"a": [40, 40, 40], "b": [40, 40]})
    # 5 rows, 3 have a previous paycheck
    assert p_upper_nonchangers(t, 40).value == pytest.approx(3 / 5)


def test_nonchangers_needs_lag():
    with pytest.raises(EstimationError):
        p_upper_nonchangers(_frame([40], [0]), 40)
    t = _lagged({"a": [40], "b": [40]})
    with pytest.raises(EstimationError):
        p_upper_nonchangers(t, 40)


def test_p_fixed():
    assert p_fixed(0) == PEstimate("fixed", 0.0)
    assert p_fixed(0.089).value == 0.089
    with pytest.raises(ValueError):
        p_fixed(1.5)
    with pytest.raises(ValueError):
        PEstimate("guess", 0.1)


def test_pto_bounded_by_B(small_sim):
    _, table, _ = small_sim
    B = bunching_mass(table, 40, 1e-9).mass
    assert 0 <= p_from_pto(table, 40, 1e-9).value <= B
    assert 0 <= p_upper_nonchangers(lag_join(table), 40, 1e-9).value <= B


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_weights_equal_replication():
    df = _frame([40, 40, 38, 40, 32], [0, 8, 0, 0, 8])
    w = np.array([2, 1, 3, 0, 1])
    rep = df.loc[np.repeat(df.index, w)].reset_index(drop=True)
    assert p_from_pto(df, 40, weights=w).value == pytest.approx(p_from_pto(rep, 40).value)


def test_pto_consistency_median_error_shrinks():
    med = []
    for n_workers in (250, 1000, 4000):
        errs = []
        for r in range(12):
            cfg = SimConfig(n_workers=n_workers, n_firms=50, p_mass=0.1, pto_prob=0.2, seed=500 + r)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                table, latent = simulate_isoelastic(cfg)
            errs.append(abs(p_from_pto(table, 40, 1e-9).value - cfg.p_at_kink))
        med.append(np.median(errs))
    assert med[0] > med[1] > med[2]


def test_pto_recovers_realized_p(small_sim):
    cfg, table, latent = small_sim
    assert p_from_pto(table, 40, 1e-9).value == pytest.approx(oracle_p(latent, 40), abs=0.01)
