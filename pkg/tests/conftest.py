import warnings

import pytest

from bunchkit.simulator import SimConfig, simulate_isoelastic

HEADER = ("worker_id,firm_id,week_index,straight_wage,hours_worked,pto_hours,sick_hours,"
          "holiday_hours,overtime_hours,pay_frequency,pay_basis")


def csv_bytes(rows, header=HEADER) -> bytes:
    return ("\n".join([header] + list(rows)) + "\n").encode()


@pytest.fixture(scope="session")
def small_sim():
    """Moderate simulated panel with counterfactual bunchers and PTO."""
    cfg = SimConfig(n_workers=1500, n_firms=150, p_mass=0.06, pto_prob=0.2, kstar_persistence=0.9, seed=11)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        table, latent = simulate_isoelastic(cfg)
    return cfg, table, latent
