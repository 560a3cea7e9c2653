"""Synthetic paycheck panels with known potential outcomes, and exact oracles.

Latent log hours ``ln h0`` follow a log-concave family. Worker and firm
effects enter through a Gaussian copula: a standard normal index
``z = a zw + b zf + c ze`` (unit variance) is mapped through the normal CDF
and then the family quantile function, so each paycheck's ``ln h0`` has
exactly the stated marginal while hours stay correlated within workers
and firms. The response to the overtime premium ``rho1`` is
``h1 = h0 rho1^eps`` (isoelastic) or ``h1 = h0 - gamma ln rho1``
(exponential production).

Counterfactual bunchers (``kstar``) sit at ``k`` paid hours whatever the
premium. When they take paid time off their worked hours are
``k - pto_hours``, so only active bunchers are observed at ``k`` among
paychecks with PTO.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy import special, stats

from .errors import EstimationError
from .paycheck_data import CSV_COLUMNS, GRID_STEP, PaycheckTable

LATENT_DISTS = ("normal_log", "logistic_log", "uniform_log")
MPH_FAMILIES = ("isoelastic", "exponential")
LATENT_COLUMNS = ("worker_id", "firm_id", "week_index", "h0", "h1", "kstar", "eta")
BLOCK_WORKERS = 256


@dataclass(frozen=True)
class SimConfig:
    """Data-generating process for :func:`simulate_isoelastic`.

    ``loc`` and ``scale`` describe ``ln h0``: normal(loc, scale),
    logistic(loc, scale) or uniform on ``[loc - scale, loc + scale]``.
    ``worker_share`` and ``firm_share`` are the shares of the copula
    index variance due to persistent worker and firm effects.
    ``kstar_persistence`` is the probability that a worker keeps last
    week's counterfactual-buncher status (otherwise it is redrawn), so the
    marginal share is ``p_mass`` at any persistence. ``pto_violation`` is
    the probability that a counterfactual buncher with PTO is nevertheless
    observed at ``k`` (breaking the PTO identification). ``elasticity_dispersion``
    makes each row's elasticity ``eps * m`` with mean-one lognormal ``m``,
    which reshuffles ranks between h0 and h1.
    """

    epsilon: float = -0.17
    latent_dist: str = "normal_log"
    loc: float = math.log(40.0)
    scale: float = 0.15
    n_workers: int = 4000
    n_weeks: int = 52
    n_firms: int = 500
    p_mass: float = 0.0
    kstar_persistence: float = 0.0
    pto_prob: float = 0.0
    pto_hours: float = 8.0
    pto_violation: float = 0.0
    worker_share: float = 0.5
    firm_share: float = 0.1
    elasticity_dispersion: float = 0.0
    rho1: float = 1.5
    k: float = 40.0
    wage_loc: float = math.log(20.0)
    wage_scale: float = 0.2
    seed: int = 0
    snap_to_grid: bool = False

    def __post_init__(self):
        if self.latent_dist not in LATENT_DISTS:
            raise ValueError(f"latent_dist must be one of {LATENT_DISTS}")
        if not self.epsilon < 0:
            raise ValueError("epsilon must be negative")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if not 0.0 <= self.p_mass < 1.0:
            raise ValueError("p_mass must lie in [0, 1)")
        for name in ("pto_prob", "pto_violation", "kstar_persistence"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not (self.worker_share >= 0 and self.firm_share >= 0 and self.worker_share + self.firm_share <= 1):
            raise ValueError("worker_share and firm_share must be nonnegative and sum to at most 1")
        if min(self.n_workers, self.n_weeks, self.n_firms) < 1:
            raise ValueError("counts must be positive")
        if self.n_firms > self.n_workers:
            raise ValueError("n_firms cannot exceed n_workers")
        if not self.rho1 > 1:
            raise ValueError("rho1 must exceed 1")
        if not 0 < self.pto_hours < self.k:
            raise ValueError("pto_hours must lie in (0, k)")

    @property
    def n_rows(self) -> int:
        return self.n_workers * self.n_weeks

    @property
    def p_at_kink(self) -> float:
        """Population share of paychecks where a counterfactual buncher is observed at k."""
        return self.p_mass * (1.0 - self.pto_prob * (1.0 - self.pto_violation))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MphSpec:
    """Marginal product of an hour.

    ``isoelastic``: ``MPH(h) = w (h / h0)^(1/eps)``.
    ``exponential``: production ``A gamma (1 - exp(-h/gamma))`` so
    ``MPH(h) = A exp(-h/gamma)`` and ``h(rho) = gamma ln(A / (rho w))``;
    every unit's response to the premium is ``gamma ln rho1``.
    """

    family: str = "isoelastic"
    gamma: float = 4.0
    wage: float = 20.0

    def __post_init__(self):
        if self.family not in MPH_FAMILIES:
            raise ValueError(f"family must be one of {MPH_FAMILIES}")
        if not (self.gamma > 0 and self.wage > 0):
            raise ValueError("gamma and wage must be positive")


# ---------------------------------------------------------------------------
# latent distribution


def _quantile_from_normal(z: np.ndarray, dist: str) -> np.ndarray:
    """Standardized family quantile of ``Phi(z)``, computed stably in the tails."""
    if dist == "normal_log":
        return z
    if dist == "logistic_log":
        return special.log_ndtr(z) - special.log_ndtr(-z)
    return 2.0 * special.ndtr(z) - 1.0


def _family(dist: str):
    return {"normal_log": stats.norm, "logistic_log": stats.logistic,
            "uniform_log": stats.uniform(loc=-1.0, scale=2.0)}[dist]


def latent_log_cdf(config: SimConfig, x):
    """CDF of ``ln h0`` (before counterfactual-buncher overrides)."""
    return _family(config.latent_dist).cdf((np.asarray(x) - config.loc) / config.scale)


def latent_log_pdf(config: SimConfig, x):
    return _family(config.latent_dist).pdf((np.asarray(x) - config.loc) / config.scale) / config.scale


def h0_cdf(config: SimConfig, y):
    return latent_log_cdf(config, np.log(y))


def h0_pdf(config: SimConfig, y):
    y = np.asarray(y, dtype=float)
    return latent_log_pdf(config, np.log(y)) / y


# ---------------------------------------------------------------------------
# generation


def _block_draws(config: SimConfig, b: int, zf: np.ndarray) -> dict:
    first = b * BLOCK_WORKERS
    last = min(config.n_workers, first + BLOCK_WORKERS)
    nw, T = last - first, config.n_weeks
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(0, b)))
    zw = rng.standard_normal(nw)
    wage = np.round(np.exp(config.wage_loc + config.wage_scale * rng.standard_normal(nw)), 2)
    ze = rng.standard_normal((nw, T))
    u_keep = rng.random((nw, T))
    u_kstar = rng.random((nw, T))
    u_pto = rng.random((nw, T))
    u_viol = rng.random((nw, T))
    z_disp = rng.standard_normal((nw, T))

    workers = np.arange(first, last)
    firms = workers % config.n_firms
    a, c = math.sqrt(config.worker_share), math.sqrt(config.firm_share)
    e = math.sqrt(max(0.0, 1.0 - config.worker_share - config.firm_share))
    z = a * zw[:, None] + c * zf[firms][:, None] + e * ze
    x = config.loc + config.scale * _quantile_from_normal(z, config.latent_dist)

    kstar = np.zeros((nw, T), dtype=bool)
    kstar[:, 0] = u_kstar[:, 0] < config.p_mass
    for t in range(1, T):
        keep = u_keep[:, t] < config.kstar_persistence
        kstar[:, t] = np.where(keep, kstar[:, t - 1], u_kstar[:, t] < config.p_mass)
    pto = u_pto < config.pto_prob
    violate = u_viol < config.pto_violation
    sd = config.elasticity_dispersion
    mult = np.exp(sd * z_disp - 0.5 * sd * sd) if sd > 0 else np.ones((nw, T))
    return {
        "worker": np.repeat(workers, T),
        "firm": np.repeat(firms, T),
        "week": np.tile(np.arange(1, T + 1), nw),
        "x": x.ravel(),
        "kstar": kstar.ravel(),
        "pto": pto.ravel(),
        "violate": violate.ravel(),
        "mult": mult.ravel(),
        "wage": np.repeat(wage, T),
    }


def _draws(config: SimConfig, threads: int = 1) -> dict:
    frng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(1,)))
    zf = frng.standard_normal(config.n_firms)
    n_blocks = -(-config.n_workers // BLOCK_WORKERS)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _block_draws(config, b, zf), range(n_blocks)))
    else:
        parts = [_block_draws(config, b, zf) for b in range(n_blocks)]
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


def observed_from_latent(h0, h1, k: float):
    """Realized hours at a kink: ``h0`` below k, ``k`` for straddlers, ``h1`` above."""
    h0 = np.asarray(h0, dtype=float)
    h1 = np.asarray(h1, dtype=float)
    if np.any(h1 > h0):
        raise ValueError("potential outcomes must satisfy h1 <= h0")
    out = np.where(h0 < k, h0, np.where(h1 > k, h1, k))
    return float(out) if out.ndim == 0 else out


def _response(h0: np.ndarray, rho, config: SimConfig, spec: MphSpec, mult: np.ndarray) -> np.ndarray:
    if spec.family == "isoelastic":
        return h0 * np.power(rho, config.epsilon * mult)
    return h0 - spec.gamma * np.log(rho) * mult


def _build(config: SimConfig, spec: MphSpec, threads: int) -> tuple:
    d = _draws(config, threads)
    h0 = np.exp(d["x"])
    h1 = _response(h0, config.rho1, config, spec, d["mult"])
    if spec.family == "exponential" and np.any(h1 <= 0):
        raise EstimationError("wage outside the MPH range: some h1 would be nonpositive")
    kstar = d["kstar"]
    pto_hours = np.where(d["pto"], config.pto_hours, 0.0)
    kstar_hours = np.where(d["pto"] & ~d["violate"], config.k - pto_hours, config.k)
    h0 = np.where(kstar, kstar_hours, h0)
    h1 = np.where(kstar, kstar_hours, h1)
    hours = observed_from_latent(h0, h1, config.k)
    if config.snap_to_grid:
        hours = np.round(hours / GRID_STEP) * GRID_STEP
    if spec.family == "isoelastic":
        eta = np.power(h0, -1.0 / config.epsilon)
    else:
        eta = np.exp(h0 / spec.gamma)

    worker_id = np.char.add("w", np.char.zfill(d["worker"].astype(str), 6))
    firm_id = np.char.add("f", np.char.zfill(d["firm"].astype(str), 4))
    n = hours.size
    frame = pd.DataFrame({
        "worker_id": worker_id.astype(object),
        "firm_id": firm_id.astype(object),
        "week_index": d["week"].astype(np.int64),
        "straight_wage": d["wage"],
        "hours_worked": hours,
        "pto_hours": pto_hours,
        "sick_hours": np.zeros(n),
        "holiday_hours": np.zeros(n),
        "overtime_hours": np.maximum(hours - config.k, 0.0),
        "pay_frequency": np.full(n, "weekly", dtype=object),
        "pay_basis": np.full(n, "hourly", dtype=object),
    }, columns=list(CSV_COLUMNS))
    latent = pd.DataFrame({
        "worker_id": frame["worker_id"],
        "firm_id": frame["firm_id"],
        "week_index": frame["week_index"],
        "h0": h0,
        "h1": h1,
        "kstar": kstar,
        "eta": eta,
    }, columns=list(LATENT_COLUMNS))
    latent.attrs["family"] = spec.family
    latent.attrs["rho1"] = config.rho1
    latent.attrs["k"] = config.k
    return PaycheckTable(frame), latent


def simulate_isoelastic(config: SimConfig, threads: int = 1) -> tuple:
    """Paycheck table and latent table from the isoelastic model.

    Rows are ordered by (worker, week). The output depends only on
    ``config`` (not on ``threads``).
    """
    return _build(config, MphSpec("isoelastic"), threads)


def simulate_general_convex(spec: MphSpec, config: SimConfig, threads: int = 1) -> tuple:
    """Like :func:`simulate_isoelastic` for any supported MPH family.

    ``h0`` draws are shared across families for a given config; the
    exponential family replaces the response with ``gamma ln rho1``.
    """
    return _build(config, spec, threads)


def latent_csv(latent: pd.DataFrame) -> str:
    """Canonical CSV text of the latent table."""
    lines = [",".join(LATENT_COLUMNS)]
    cols = [latent[c].to_numpy() for c in LATENT_COLUMNS]
    for w, f, t, a, b, ks, e in zip(*cols):
        lines.append(f"{w},{f},{int(t)},{float(a)!r},{float(b)!r},{int(bool(ks))},{float(e)!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# oracles


def _straddle(latent: pd.DataFrame, k: float) -> np.ndarray:
    h0 = latent["h0"].to_numpy(dtype=float)
    h1 = latent["h1"].to_numpy(dtype=float)
    return (h1 <= k) & (k <= h0)


def oracle_buncher_ate(latent: pd.DataFrame, k: float) -> float:
    """Exact mean of ``h0 - h1`` over active bunchers."""
    active = _straddle(latent, k) & ~latent["kstar"].to_numpy(dtype=bool)
    if not active.any():
        raise EstimationError("no active bunchers in the latent table")
    d = latent["h0"].to_numpy(dtype=float) - latent["h1"].to_numpy(dtype=float)
    return float(d[active].mean())


def oracle_p(latent: pd.DataFrame, k: float) -> float:
    """Realized share of rows where a counterfactual buncher is observed at ``k``."""
    kstar = latent["kstar"].to_numpy(dtype=bool)
    return float((kstar & (latent["h0"].to_numpy(dtype=float) == k)).mean())


@dataclass(frozen=True)
class IdentityReport:
    bunching_count: bool
    below_equal: bool
    above_equal: bool
    bad_rows: tuple = field(default=())

    @property
    def passed(self) -> bool:
        return self.bunching_count and self.below_equal and self.above_equal


def oracle_identities(latent: pd.DataFrame, hours, k: float) -> IdentityReport:
    """Check observed hours against the potential outcomes.

    (a) the number of rows at ``k`` equals the number with
    ``h1 <= k <= h0``; (b) the multiset of observed hours below ``k``
    equals that of ``h0`` below ``k``, and above ``k`` that of ``h1``
    above ``k``. ``bad_rows`` lists row positions that break the
    row-level versions of these equalities.
    """
    h = np.asarray(hours, dtype=float)
    h0 = latent["h0"].to_numpy(dtype=float)
    h1 = latent["h1"].to_numpy(dtype=float)
    straddle = _straddle(latent, k)
    at = h == k
    count_ok = int(at.sum()) == int(straddle.sum())
    below_ok = np.array_equal(np.sort(h[h < k]), np.sort(h0[h0 < k]))
    above_ok = np.array_equal(np.sort(h[h > k]), np.sort(h1[h1 > k]))
    expected = np.where(h0 < k, h0, np.where(h1 > k, h1, k))
    bad = np.flatnonzero(h != expected)
    return IdentityReport(count_ok, below_ok, above_ok, tuple(int(i) for i in bad))


def hours_under(latent: pd.DataFrame, k: float, rho: float, family: str | None = None,
                base_k: float | None = None) -> np.ndarray:
    """Observed hours if the kink were at ``k`` with premium ``rho``.

    Uses each row's own response (interpolated in ``ln rho`` between
    ``h0`` and ``h1``), so it is exact for both MPH families including
    heterogeneous elasticities. Counterfactual bunchers keep their hours.
    """
    family = latent.attrs.get("family", "isoelastic") if family is None else family
    rho1 = latent.attrs.get("rho1", 1.5)
    h0 = latent["h0"].to_numpy(dtype=float)
    h1 = latent["h1"].to_numpy(dtype=float)
    kstar = latent["kstar"].to_numpy(dtype=bool)
    s = math.log(rho) / math.log(rho1)
    if family == "isoelastic":
        hr = h0 * np.power(h1 / h0, s)
    else:
        hr = h0 - (h0 - h1) * s
    out = np.where(hr > k, hr, np.where(h0 < k, h0, k))
    return np.where(kstar, h0, out)


@dataclass(frozen=True)
class PolicyOracle:
    bunching_base: float
    bunching_new: float
    mean_hours_base: float
    mean_hours_new: float
    mean_h0: float

    @property
    def delta_bunching(self) -> float:
        return self.bunching_new - self.bunching_base

    @property
    def delta_hours(self) -> float:
        return self.mean_hours_new - self.mean_hours_base

    @property
    def effect_of_kink(self) -> float:
        return self.mean_hours_base - self.mean_h0


def oracle_policy(latent: pd.DataFrame, scenario, scenario_new) -> PolicyOracle:
    """Exact bunching and mean hours under two (k, rho1) regimes on the same draws."""
    base = hours_under(latent, scenario.k, scenario.rho1)
    new = hours_under(latent, scenario_new.k, scenario_new.rho1)
    return PolicyOracle(
        float((base == scenario.k).mean()),
        float((new == scenario_new.k).mean()),
        float(base.mean()),
        float(new.mean()),
        float(latent["h0"].to_numpy(dtype=float).mean()),
    )


@dataclass(frozen=True)
class AnalyticKink:
    """Population quantities at the kink for a homogeneous isoelastic DGP."""

    f0: float
    f1: float
    B_active: float
    p: float

    @property
    def B(self) -> float:
        return self.B_active + self.p


def analytic_kink(config: SimConfig, k: float | None = None, rho1: float | None = None) -> AnalyticKink:
    """Densities of h0, h1 at ``k`` and the active bunching mass, from the latent law.

    Densities and masses of the continuous part are scaled by ``1 - p_mass``.
    """
    k = config.k if k is None else k
    rho1 = config.rho1 if rho1 is None else rho1
    share = 1.0 - config.p_mass
    c = rho1 ** (-config.epsilon)
    f0 = share * float(h0_pdf(config, k))
    f1 = share * float(h0_pdf(config, k * c)) * c
    B = share * float(h0_cdf(config, k * c) - h0_cdf(config, k))
    p = config.p_at_kink if k == config.k else 0.0
    return AnalyticKink(f0, f1, B, p)


def small_kink_ratio(config: SimConfig, rho: float, rho_new: float, k: float | None = None) -> float:
    """Bunching per unit premium change over its small-kink limit.

    Compares ``P(h(rho_new) <= k <= h(rho)) / (rho_new - rho)`` with
    ``-f_rho(k) E[dh/drho | h(rho) = k]``, both analytic for the
    homogeneous isoelastic model; tends to 1 as ``rho_new -> rho``.
    """
    k = config.k if k is None else k
    eps = config.epsilon
    lo, hi = k * rho ** (-eps), k * rho_new ** (-eps)
    mass = float(h0_cdf(config, hi) - h0_cdf(config, lo))
    density = float(h0_pdf(config, lo)) * rho ** (-eps)
    limit = -density * eps * k / rho
    return (mass / (rho_new - rho)) / limit


def clustered_mean_se(values, clusters) -> tuple:
    """Mean of ``values`` and its standard error clustered on ``clusters``."""
    v = np.asarray(values, dtype=float)
    codes, _ = pd.factorize(np.asarray(clusters), sort=False)
    m = v.mean()
    sums = np.bincount(codes, weights=v - m)
    G, n = sums.size, v.size
    var = (G / max(G - 1, 1)) * float(np.sum(sums ** 2)) / n ** 2
    return float(m), math.sqrt(var)
