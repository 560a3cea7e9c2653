"""Counterfactual bunching mass: units that would sit at k without the kink."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .empirical_dist import GRID_TOL, bunching_mass
from .errors import EstimationError

METHODS = ("fixed", "pto", "nonchanger_upper")


@dataclass(frozen=True)
class PEstimate:
    method: str
    value: float
    is_upper_bound: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")

    def to_dict(self) -> dict:
        return {"method": self.method, "value": self.value, "is_upper_bound": self.is_upper_bound}


def p_fixed(value: float) -> PEstimate:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {value}")
    return PEstimate("fixed", float(value), False)


def _frame(table):
    return table.frame if hasattr(table, "frame") else table


def p_from_pto(table, k: float, tol: float = GRID_TOL, weights=None) -> PEstimate:
    """``B`` minus the bunching share among paychecks with PTO.

    Rows with paid time off cannot be counterfactual bunchers at ``k`` hours
    worked, so their bunching share measures active bunching only.
    Negative estimates are clipped to 0 with a warning.
    """
    df = _frame(table)
    if "pto_hours" not in df.columns:
        raise EstimationError("table has no pto_hours column")
    hours = df["hours_worked"].to_numpy(dtype=float)
    pto = df["pto_hours"].to_numpy(dtype=float) > 0
    w = np.ones(len(df)) if weights is None else np.asarray(weights, dtype=float)
    if not (pto & (w > 0)).any():
        raise EstimationError("no rows with positive PTO hours")
    B = bunching_mass(hours, k, tol, weights=w).mass
    cond = bunching_mass(hours, k, tol, mask=pto, weights=w).mass
    value = B - cond
    if value < 0:
        warnings.warn(f"PTO-based p estimate {value:.4g} is negative; clipped to 0", stacklevel=2)
        value = 0.0
    return PEstimate("pto", float(value), False)


def p_upper_nonchangers(table, k: float, tol: float = GRID_TOL, weights=None) -> PEstimate:
    """Share of paychecks at ``k`` whose previous paycheck was also at ``k``.

    Counterfactual bunchers should not move week to week, so this share
    bounds their mass from above. Rows without a previous paycheck count
    in the denominator but never as non-changers. Needs ``lag_hours``
    (see :func:`bunchkit.paycheck_data.lag_join`).
    """
    df = _frame(table)
    if "lag_hours" not in df.columns:
        raise EstimationError("table has no lag_hours column; run lag_join first")
    lag = df["lag_hours"].to_numpy(dtype=float)
    has_lag = np.isfinite(lag)
    if not has_lag.any():
        raise EstimationError("no rows with a previous paycheck")
    hours = df["hours_worked"].to_numpy(dtype=float)
    same = has_lag & (np.abs(hours - k) < tol) & (np.abs(np.where(has_lag, lag, np.inf) - k) < tol)
    w = np.ones(len(df)) if weights is None else np.asarray(weights, dtype=float)
    return PEstimate("nonchanger_upper", float(w[same].sum() / w.sum()), True)
