"""Firm-clustered bootstrap and Imbens-Manski intervals for partially identified parameters."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .errors import BunchkitError, EstimationError

log = logging.getLogger(__name__)

BISECTION_TOL = 1e-6
BISECTION_MAX_ITER = 200
DEFAULT_REPS = 500


def replicate_rng(seed: int, r: int) -> np.random.Generator:
    """Generator for replicate ``r``; depends only on ``(seed, r)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))


@dataclass(frozen=True)
class BootstrapResult:
    """Successful replicate records in replicate order plus the failure count."""

    replicates: tuple
    n_reps: int
    seed: int
    failed_reps: int
    failures: tuple = field(default=())

    def __post_init__(self):
        if len(self.replicates) + self.failed_reps != self.n_reps:
            raise ValueError("replicates plus failures must equal n_reps")

    def values(self, name: str) -> np.ndarray:
        return np.array([rec[name] for rec in self.replicates], dtype=float)


def firm_multiplicities(n_firms: int, rng: np.random.Generator) -> np.ndarray:
    """How many times each firm is drawn when resampling ``n_firms`` with replacement."""
    draws = rng.integers(0, n_firms, size=n_firms)
    return np.bincount(draws, minlength=n_firms)


def cluster_bootstrap(table, statistic, n_reps: int = DEFAULT_REPS, seed: int = 0,
                      threads: int = 1, weighted: bool = False) -> BootstrapResult:
    """Resample firms with replacement and evaluate ``statistic`` on each replicate.

    Parameters
    ----------
    table : PaycheckTable
    statistic : callable
        ``statistic(resampled_table) -> dict`` of floats. With
        ``weighted=True`` it is instead called as ``statistic(row_weights)``
        where ``row_weights`` holds each row's multiplicity in the
        replicate; this is equivalent to concatenating the drawn firms and
        much faster for ECDF-based statistics.
    n_reps, seed : int
        Replicate ``r`` uses the stream ``(seed, r)`` only, so results do
        not depend on ``threads``.
    threads : int
        Worker threads for evaluating replicates.

    Replicates whose statistic raises a library error are dropped and
    counted in ``failed_reps``.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    n_firms = table.n_firms
    if n_firms < 2:
        raise EstimationError(f"cluster bootstrap needs at least 2 firms, got {n_firms}")
    codes = table.firm_codes
    index = table.firm_index
    ids = table.firm_ids

    def one(r: int):
        counts = firm_multiplicities(n_firms, replicate_rng(seed, r))
        try:
            if weighted:
                return statistic(counts[codes].astype(float))
            rows = np.concatenate([np.tile(index[ids[j]], c) for j, c in enumerate(counts) if c > 0])
            return statistic(table.take(rows))
        except BunchkitError as exc:
            return exc

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                out = list(pool.map(one, range(n_reps)))
        else:
            out = [one(r) for r in range(n_reps)]
    good = tuple(o for o in out if not isinstance(o, Exception))
    bad = tuple(f"replicate {r}: {o}" for r, o in enumerate(out) if isinstance(o, Exception))
    if bad:
        log.info("%d of %d bootstrap replicates failed", len(bad), n_reps)
    return BootstrapResult(good, n_reps, seed, len(bad), bad)


def se_from_replicates(result: BootstrapResult, name: str) -> float:
    """Sample standard deviation (ddof 1) of one field across successful replicates."""
    vals = result.values(name)
    if vals.size < 2:
        raise EstimationError(f"need at least 2 successful replicates, got {vals.size}")
    return float(np.std(vals, ddof=1))


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class ImCi:
    alpha: float
    lower: float
    upper: float
    critical_value: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.lower <= self.upper:
            raise ValueError("lower exceeds upper")

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper

    def to_dict(self) -> dict:
        return {"ci_lower": self.lower, "ci_upper": self.upper,
                "im_critical_value": self.critical_value, "alpha": self.alpha}


def im_critical_value(width_over_se: float, alpha: float) -> float:
    """Solve ``Phi(c + w) - Phi(-c) = 1 - alpha`` for ``c`` by bisection."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    nd = NormalDist()
    lo, hi = nd.inv_cdf(1 - alpha), nd.inv_cdf(1 - alpha / 2)
    if not math.isfinite(width_over_se):
        return lo

    def gap(c):
        return normal_cdf(c + width_over_se) - normal_cdf(-c) - (1 - alpha)

    if gap(lo) >= 0:
        return lo
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if gap(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < BISECTION_TOL:
            break
    return 0.5 * (lo + hi)


def im_confidence_interval(lower_hat: float, upper_hat: float, se_lower: float,
                           se_upper: float, alpha: float = 0.05) -> ImCi:
    """Confidence interval covering the true parameter with probability ``1 - alpha``.

    The critical value moves from two-sided (point identification) to
    one-sided (wide identified set) with the estimated width relative to
    the larger standard error.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if se_lower < 0 or se_upper < 0:
        raise ValueError("standard errors must be nonnegative")
    if lower_hat > upper_hat:
        warnings.warn("lower_hat exceeds upper_hat; swapping", stacklevel=2)
        lower_hat, upper_hat = upper_hat, lower_hat
        se_lower, se_upper = se_upper, se_lower
    scale = max(se_lower, se_upper)
    if scale == 0:
        c = NormalDist().inv_cdf(1 - alpha / 2) if upper_hat == lower_hat else NormalDist().inv_cdf(1 - alpha)
        return ImCi(alpha, lower_hat, upper_hat, c)
    c = im_critical_value((upper_hat - lower_hat) / scale, alpha)
    return ImCi(alpha, lower_hat - c * se_lower, upper_hat + c * se_upper, c)
