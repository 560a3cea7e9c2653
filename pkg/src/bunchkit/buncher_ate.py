"""Sharp bi-log-concavity bounds on the average effect among bunchers.

Everything here is closed-form arithmetic on the kink statistics
(``KinkEstimates``, the observed mass ``B`` and the counterfactual mass
``p``), plus two benchmarks computed on log hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundary_density import DEFAULT_DEGREE, KinkEstimates, kink_estimates
from .empirical_dist import GRID_TOL, EmpiricalCDF, as_hours
from .errors import DomainError, EstimationError, FeasibilityError, PreconditionError

LN_PREMIUM = math.log(1.5)
UNITS = ("hours", "log_hours", "elasticity", "probability")
_SERIES_CUTOFF = 1e-6
# net bunching below this is treated as zero (float noise in B - p)
MASS_TOL = 1e-12


@dataclass(frozen=True)
class BoundInterval:
    lower: float
    upper: float
    units: str = "hours"

    def __post_init__(self):
        if self.units not in UNITS:
            raise ValueError(f"units must be one of {UNITS}")
        if not self.lower <= self.upper:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper

    def __add__(self, other: "BoundInterval") -> "BoundInterval":
        return BoundInterval(self.lower + other.lower, self.upper + other.upper, self.units)

    def negated(self) -> "BoundInterval":
        return BoundInterval(-self.upper, -self.lower, self.units)

    def scaled(self, c: float, units: str | None = None) -> "BoundInterval":
        lo, hi = sorted((self.lower * c, self.upper * c))
        return BoundInterval(lo, hi, units or self.units)

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "units": self.units}


@dataclass(frozen=True)
class AteInputs:
    """Kink statistics with the observed and counterfactual bunching masses."""

    estimates: KinkEstimates
    B: float
    p: float

    def __post_init__(self):
        if self.p < 0 or self.p > self.B + MASS_TOL:
            raise PreconditionError(f"need 0 <= p <= B, got p={self.p}, B={self.B}")

    @classmethod
    def from_estimates(cls, est: KinkEstimates, p: float | None = None) -> "AteInputs":
        p = est.p if p is None else p
        return cls(est.with_p(p), est.B, p)

    @property
    def F0(self) -> float:
        return self.estimates.F_minus + self.p

    @property
    def F1(self) -> float:
        return self.estimates.F_plus

    @property
    def f0(self) -> float:
        return self.estimates.f_minus

    @property
    def f1(self) -> float:
        return self.estimates.f_plus


def g_fn(a: float, b: float, x: float) -> float:
    """Average quantile shift under the exponential BLC envelope.

    ``g(a, b, x) = (a / (b x)) (a + x) ln(1 + x/a) - a/b``, the mean of
    ``(a/b) ln(u/a)`` over ``u`` between ``a`` and ``a + x``. Homogeneous
    of degree zero. Uses a Taylor series for ``|x| < 1e-6 a``.
    """
    if not (a > 0 and b > 0):
        raise DomainError(f"need a > 0 and b > 0, got a={a}, b={b}")
    if not a + x > 0:
        raise DomainError(f"need a + x > 0, got a={a}, x={x}")
    y = x / a
    if abs(y) < _SERIES_CUTOFF:
        # (1+y)ln(1+y)/y - 1 = y/2 - y^2/6 + y^3/12 - y^4/20 + ...
        return (a / b) * y * (0.5 + y * (-1.0 / 6.0 + y * (1.0 / 12.0 - y / 20.0)))
    return (a / b) * ((1.0 + y) * math.log1p(y) / y - 1.0)


def _check_feasible(inp: AteInputs) -> None:
    F0, F1, B, p = inp.F0, inp.F1, inp.B, inp.p
    if not inp.f0 > 0:
        raise FeasibilityError("density must be positive", "f0")
    if not inp.f1 > 0:
        raise FeasibilityError("density must be positive", "f1")
    if not 1 - F1 > 0:
        raise FeasibilityError(f"1 - F1 = {1 - F1} must be positive", "1-F1")
    if not F0 - p > 0:
        raise FeasibilityError(f"F0 - p = {F0 - p} must be positive", "F0-p")
    if not 1 - F0 > B - p:
        raise FeasibilityError(f"1 - F0 = {1 - F0} must exceed B - p = {B - p}", "1-F0")
    if not F1 - p > B - p:
        raise FeasibilityError(f"F1 - p = {F1 - p} must exceed B - p = {B - p}", "F1-p")


def buncher_ate_bounds(inp: AteInputs) -> BoundInterval:
    """Sharp bounds ``[lower, upper]`` on the buncher ATE in hours."""
    if inp.B - inp.p <= MASS_TOL:
        return BoundInterval(0.0, 0.0, "hours")
    _check_feasible(inp)
    x = inp.B - inp.p
    lower = g_fn(inp.F0 - inp.p, inp.f0, x) + g_fn(1 - inp.F1, inp.f1, x)
    upper = -g_fn(1 - inp.F0, inp.f0, -x) - g_fn(inp.F1 - inp.p, inp.f1, -x)
    return BoundInterval(lower, upper, "hours")


def small_kink_approx(inp: AteInputs) -> float:
    """First-order value ``(B-p)/(2 f0) + (B-p)/(2 f1)``."""
    if not (inp.f0 > 0 and inp.f1 > 0):
        raise FeasibilityError("densities must be positive", "f0" if not inp.f0 > 0 else "f1")
    x = max(inp.B - inp.p, 0.0)
    return x / (2 * inp.f0) + x / (2 * inp.f1)


def ate_to_elasticity(delta: float, k: float) -> float:
    """Elasticity magnitude implied by an hours effect at the kink."""
    if not k > 0:
        raise ValueError("k must be positive")
    return delta / (k * LN_PREMIUM)


def _log_estimates(data, k: float, p: float, bandwidth, tol: float, degree: int) -> KinkEstimates:
    F = data if isinstance(data, EmpiricalCDF) else EmpiricalCDF(as_hours(data))
    if F.sorted_values[0] <= 0:
        raise EstimationError("log-hours benchmarks need positive hours")
    return kink_estimates(F.transformed(np.log), math.log(k), p, bandwidth=bandwidth,
                          degree=degree, tol=tol / k)


def isoelastic_blc_bounds(data, k: float, p: float, bandwidth: float | None = None,
                          tol: float = GRID_TOL, degree: int = DEFAULT_DEGREE) -> BoundInterval:
    """Elasticity bounds assuming ln h0 and ln h1 are bi-log-concave.

    Applies the level bounds to log hours (kink at ln k); the log-hours
    effect divided by ln 1.5 is the elasticity magnitude. ``bandwidth``
    is in log units when given.
    """
    est = _log_estimates(data, k, p, bandwidth, tol, degree)
    if est.B - p <= MASS_TOL:
        return BoundInterval(0.0, 0.0, "elasticity")
    return buncher_ate_bounds(AteInputs.from_estimates(est, p)).scaled(1 / LN_PREMIUM, "elasticity")


def saez_from_estimates(est: KinkEstimates, p: float) -> float:
    """Log-hours shift whose trapezoid under the interpolated density has area B - p."""
    x = est.B - p
    if abs(x) <= MASS_TOL:
        return 0.0
    height = est.f_minus + est.f_plus
    if not height > 0 or x < 0:
        raise EstimationError("no nonnegative solution for the missing-region width")
    return 2.0 * x / height


def saez_linear_epsilon(data, k: float, p: float, bandwidth: float | None = None,
                        tol: float = GRID_TOL, degree: int = DEFAULT_DEGREE) -> float:
    """Elasticity magnitude assuming the log-hours density of h0 is linear across the gap.

    The gap runs from ln k (density f0) to ln k + delta (density f1); the
    trapezoid area ``delta (f0 + f1) / 2`` equals ``B - p``.
    """
    est = _log_estimates(data, k, p, bandwidth, tol, degree)
    return saez_from_estimates(est, p) / LN_PREMIUM
