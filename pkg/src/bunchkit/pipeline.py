"""Estimate assembly: kink statistics, p corrections, bounds, policy and bootstrap inference."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .boundary_density import DEFAULT_DEGREE, kink_estimates, select_bandwidth
from .buncher_ate import (LN_PREMIUM, AteInputs, BoundInterval, buncher_ate_bounds,
                          isoelastic_blc_bounds, saez_linear_epsilon, small_kink_approx)
from .counterfactual_mass import METHODS, PEstimate, p_fixed, p_from_pto, p_upper_nonchangers
from .empirical_dist import GRID_TOL, EmpiricalCDF
from .errors import EstimationError, PreconditionError
from .inference import cluster_bootstrap, im_confidence_interval, se_from_replicates
from .paycheck_data import PaycheckTable, lag_join
from .policy import (double_time_effect, expost_kink_effect, flsa_total_effect, kink_shift_bunching,
                     kink_shift_hours, marginal_statics, wage_effect_upper)

POINT_FIELDS = ("B", "p", "net_bunching", "small_kink", "saez_epsilon")
INTERVAL_FIELDS = ("ate", "elasticity", "iso_elasticity")


@dataclass(frozen=True)
class EstimateConfig:
    """Settings shared by point estimates and bootstrap replicates.

    ``p_methods`` lists the counterfactual-mass corrections to report side
    by side; ``p_value`` feeds the ``fixed`` method.
    """

    k: float = 40.0
    p_methods: tuple = ("fixed",)
    p_value: float = 0.0
    bandwidth: float | None = None
    degree: int = DEFAULT_DEGREE
    tol: float = GRID_TOL
    alpha: float = 0.05

    def __post_init__(self):
        for m in self.p_methods:
            if m not in METHODS:
                raise ValueError(f"unknown p method {m!r}; choose from {METHODS}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_methods"] = list(self.p_methods)
        return d


def resolve_p(table: PaycheckTable, method: str, cfg: EstimateConfig, weights=None) -> PEstimate:
    if method == "fixed":
        return p_fixed(cfg.p_value)
    if method == "pto":
        return p_from_pto(table, cfg.k, cfg.tol, weights)
    return p_upper_nonchangers(table, cfg.k, cfg.tol, weights)


def point_estimates(F: EmpiricalCDF, p: float, cfg: EstimateConfig, bandwidth: float,
                    log_bandwidth: float | None = None) -> dict:
    """All reported statistics for one p value on one (possibly reweighted) sample."""
    est = kink_estimates(F, cfg.k, p, bandwidth=bandwidth, degree=cfg.degree, tol=cfg.tol)
    inp = AteInputs.from_estimates(est, p)
    ate = buncher_ate_bounds(inp)
    conv = cfg.k * LN_PREMIUM
    iso = isoelastic_blc_bounds(F, cfg.k, p, bandwidth=log_bandwidth, tol=cfg.tol, degree=cfg.degree)
    saez = saez_linear_epsilon(F, cfg.k, p, bandwidth=log_bandwidth, tol=cfg.tol, degree=cfg.degree)
    return {
        "B": est.B,
        "p": p,
        "net_bunching": est.B - p,
        "F_minus": est.F_minus,
        "F_plus": est.F_plus,
        "f_minus": est.f_minus,
        "f_plus": est.f_plus,
        "bandwidth": est.bandwidth,
        "ate_lower": ate.lower,
        "ate_upper": ate.upper,
        "elasticity_lower": ate.lower / conv,
        "elasticity_upper": ate.upper / conv,
        "iso_elasticity_lower": iso.lower,
        "iso_elasticity_upper": iso.upper,
        "small_kink": small_kink_approx(inp),
        "saez_epsilon": saez,
    }


def _log_bandwidth(F: EmpiricalCDF, k: float) -> float:
    return select_bandwidth(F.transformed(np.log), math.log(k))


def _signed(d: dict) -> dict:
    """Report elasticities as negative numbers (magnitudes are kept internally)."""
    out = dict(d)
    for stem in ("elasticity", "iso_elasticity"):
        lo, hi = d.get(f"{stem}_lower"), d.get(f"{stem}_upper")
        if lo is not None:
            out[f"{stem}_lower"], out[f"{stem}_upper"] = -hi, -lo
    if "saez_epsilon" in d:
        out["saez_epsilon"] = -d["saez_epsilon"]
    return out


@dataclass
class MethodResult:
    p: PEstimate
    point: dict
    inference: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"p": self.p.to_dict(), "estimates": _signed(self.point), "inference": self.inference}


def _inference_block(boot, point: dict, alpha: float) -> dict:
    if len(boot.replicates) < 2:
        return {"n_failed_reps": boot.failed_reps, "n_reps": boot.n_reps, "error": "too few successful replicates"}
    out = {"n_failed_reps": boot.failed_reps, "n_reps": boot.n_reps}
    for name in POINT_FIELDS:
        out[f"se_{name}"] = se_from_replicates(boot, name)
    for stem in INTERVAL_FIELDS:
        lo, hi = point[f"{stem}_lower"], point[f"{stem}_upper"]
        se_lo = se_from_replicates(boot, f"{stem}_lower")
        se_hi = se_from_replicates(boot, f"{stem}_upper")
        ci = im_confidence_interval(lo, hi, se_lo, se_hi, alpha)
        block = {"se_lower": se_lo, "se_upper": se_hi}
        if stem == "ate":
            block.update(ci.to_dict())
        else:
            # elasticities are reported with a negative sign
            block.update({"se_lower": se_hi, "se_upper": se_lo, "ci_lower": -ci.upper,
                          "ci_upper": -ci.lower, "im_critical_value": ci.critical_value, "alpha": alpha})
        out[stem] = block
    return out


def bootstrap_statistic(table: PaycheckTable, method: str, cfg: EstimateConfig, F: EmpiricalCDF,
                        bandwidth: float, log_bandwidth: float):
    """Replicate statistic on row multiplicity weights; bandwidths fixed at full-sample values."""

    def stat(weights):
        Fw = F.reweight(weights)
        p = resolve_p(table, method, cfg, weights).value
        B = Fw.left_limit(cfg.k + cfg.tol) - Fw(cfg.k - cfg.tol)
        if p > B:
            if method == "fixed":
                raise PreconditionError(f"p = {p} exceeds replicate bunching {B}")
            p = B
        return point_estimates(Fw, p, cfg, bandwidth, log_bandwidth)

    return stat


def estimate_table(table: PaycheckTable, cfg: EstimateConfig, n_reps: int = 0, seed: int | None = None,
                   threads: int = 1) -> dict:
    """Point estimates (and optionally bootstrap inference) for every requested p method.

    Returns a dict ``method -> MethodResult``. Methods that cannot be
    computed on this table map to an error string.
    """
    if "nonchanger_upper" in cfg.p_methods and "lag_hours" not in table.frame.columns:
        table = lag_join(table)
    F = EmpiricalCDF(table.hours)
    bandwidth = cfg.bandwidth if cfg.bandwidth is not None else select_bandwidth(F, cfg.k)
    log_bw = _log_bandwidth(F, cfg.k)
    out = {}
    for method in cfg.p_methods:
        try:
            p = resolve_p(table, method, cfg)
            point = point_estimates(F, p.value, cfg, bandwidth, log_bw)
        except EstimationError as exc:
            if len(cfg.p_methods) == 1:
                raise
            out[method] = f"{type(exc).__name__}: {exc}"
            continue
        res = MethodResult(p, point)
        if n_reps:
            stat = bootstrap_statistic(table, method, cfg, F, bandwidth, log_bw)
            boot = cluster_bootstrap(table, stat, n_reps, seed, threads=threads, weighted=True)
            res.inference = _inference_block(boot, point, cfg.alpha)
        out[method] = res
    return out


def shift_curve(est, p: float, F: EmpiricalCDF, k_primes) -> list:
    """Rows ``(k_prime, bunch_lo, bunch_hi, hours_lo, hours_hi)`` for a kink-shift plot."""
    rows = []
    for kp in k_primes:
        b = kink_shift_bunching(est, p, float(kp), F)
        h = kink_shift_hours(est, p, float(kp), F)
        rows.append((float(kp), b.lower, b.upper, h.lower, h.upper))
    return rows


def policy_analysis(table: PaycheckTable, cfg: EstimateConfig, p: float, rho_bar: float = 2.0,
                    k_primes=None) -> tuple:
    """Ex-post kink effect, wage effect, total, statics, double time and kink-shift curve.

    The elasticity interval used for extrapolation is the buncher ATE
    bounds converted at the kink.
    """
    F = EmpiricalCDF(table.hours)
    bandwidth = cfg.bandwidth if cfg.bandwidth is not None else select_bandwidth(F, cfg.k)
    est = kink_estimates(F, cfg.k, p, bandwidth=bandwidth, degree=cfg.degree, tol=cfg.tol)
    ate = buncher_ate_bounds(AteInputs.from_estimates(est, p))
    conv = cfg.k * LN_PREMIUM
    elasticity = BoundInterval(ate.lower / conv, ate.upper / conv, "elasticity")
    h = table.hours
    kink = expost_kink_effect(h, est, est.B, p, elasticity, tol=cfg.tol)
    wage = wage_effect_upper(h, elasticity.upper, cfg.k, tol=cfg.tol)
    statics = marginal_statics(est, est.B, p, elasticity, h, tol=cfg.tol)
    dt = double_time_effect(h, est, est.B, p, elasticity, rho_bar=rho_bar, tol=cfg.tol)
    report = flsa_total_effect(kink, wage, statics, {
        "elasticity_source": "buncher ATE bounds divided by k ln 1.5",
        "overtime_response": "between the buncher ATE lower bound and constant-elasticity extrapolation",
        "new_bunchers_valued_at": "k",
        "counterfactual_bunchers": "stay at the original kink under reforms",
        "premium_derivatives": "constant-elasticity reading of E[dh/drho | h]",
    })
    if k_primes is None:
        lo, hi = F.sorted_values[0], F.sorted_values[-1]
        k_primes = [x for x in np.arange(cfg.k - 4.0, cfg.k + 4.0 + 1e-9, 0.5) if lo <= x <= hi]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        curve = shift_curve(est, p, F, k_primes)
    return report, dt, est, curve


def group_tables(table: PaycheckTable, column: str) -> dict:
    """Split a table by the values of ``column`` (sorted)."""
    if column not in table.frame.columns:
        raise EstimationError(f"group_by column {column!r} not in table")
    vals = table.frame[column].astype(str).to_numpy()
    return {g: table.take(np.flatnonzero(vals == g)) for g in sorted(set(vals))}

