"""Policy counterfactuals: ex-post effect of the kink and reforms to it.

Elasticity inputs are ``BoundInterval`` objects holding magnitudes
(units ``"elasticity"``); the sign is applied here, where hours responses
are formed. Counterfactual bunchers are assumed to stay at the original
kink under every reform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boundary_density import KinkEstimates
from .buncher_ate import AteInputs, BoundInterval, buncher_ate_bounds, g_fn
from .empirical_dist import GRID_TOL, EmpiricalCDF, as_hours
from .errors import EstimationError

ENVELOPE_SIDES = ("extend_right_of_F0", "extend_left_of_F1")
QUADRATURE_STEP = 0.125


@dataclass(frozen=True)
class PolicyScenario:
    k: float = 40.0
    rho1: float = 1.5
    rho0: float = 1.0

    def __post_init__(self):
        if self.rho0 != 1.0:
            raise ValueError("rho0 is fixed at 1")
        if not self.rho1 > self.rho0:
            raise ValueError("rho1 must exceed rho0")


@dataclass(frozen=True)
class BlcEnvelope:
    anchor_F: float
    anchor_f: float
    side: str = "extend_right_of_F0"

    def __post_init__(self):
        if self.side not in ENVELOPE_SIDES:
            raise ValueError(f"side must be one of {ENVELOPE_SIDES}")
        if not self.anchor_f > 0:
            raise ValueError("anchor density must be positive")
        if not 0.0 < self.anchor_F < 1.0:
            raise ValueError("anchor CDF value must lie strictly between 0 and 1")


def blc_envelope_eval(env: BlcEnvelope, t: float) -> BoundInterval:
    """CDF range at ``k + t`` for any bi-log-concave F through the anchor.

    ``1 - (1-F) exp(-f t / (1-F)) <= F(k+t) <= F exp(f t / F)``, clipped to [0, 1].
    """
    F, f = env.anchor_F, env.anchor_f
    with np.errstate(over="ignore"):
        lo = 1.0 - (1.0 - F) * math.exp(min(-f * t / (1.0 - F), 700.0))
        hi = F * math.exp(min(f * t / F, 700.0))
    lo, hi = min(max(lo, 0.0), 1.0), min(max(hi, 0.0), 1.0)
    # the envelopes touch at t = 0; guard against rounding there
    return BoundInterval(min(lo, hi), hi, "probability")


def _ecdf(sample) -> EmpiricalCDF:
    return sample if isinstance(sample, EmpiricalCDF) else EmpiricalCDF(as_hours(sample))


def kink_shift_bunching(estimates: KinkEstimates, p: float, k_prime: float, sample) -> BoundInterval:
    """Bounds on kink-induced bunching ``B(k') - p(k')`` if the kink moved to ``k'``.

    Above the kink, ``F1(k')`` is the observed CDF and the non-buncher part
    of ``F0`` is extended from ``(F0(k), f0(k))`` by the BLC envelope.
    Below, roles swap. Envelopes are applied to the distribution of units
    that are not counterfactual bunchers (total mass ``1 - p``).
    """
    F = _ecdf(sample)
    k = estimates.k
    lo_support, hi_support = F.sorted_values[0], F.sorted_values[-1]
    if not lo_support <= k_prime <= hi_support:
        raise EstimationError(f"k' = {k_prime} outside the data support [{lo_support}, {hi_support}]")
    x = estimates.B - p
    if k_prime == k:
        return BoundInterval(x, x, "probability")
    mass = 1.0 - p
    t = k_prime - k
    if k_prime > k:
        Fm, fm = estimates.F_minus, estimates.f_minus
        env = blc_envelope_eval(BlcEnvelope(Fm / mass, fm / mass, "extend_right_of_F0"), t)
        f0_lo, f0_hi = mass * env.lower, mass * env.upper
        observed = F(k_prime) - p
        lo, hi = observed - f0_hi, observed - f0_lo
    else:
        Fp, fp = estimates.F_plus - p, estimates.f_plus
        env = blc_envelope_eval(BlcEnvelope(Fp / mass, fp / mass, "extend_left_of_F1"), t)
        f1_lo, f1_hi = mass * env.lower, mass * env.upper
        observed = F(k_prime)
        lo, hi = f1_lo - observed, f1_hi - observed
    lo, hi = min(max(lo, 0.0), 1.0), min(max(hi, 0.0), 1.0)
    # the envelopes touch at t = 0; guard against rounding there
    return BoundInterval(min(lo, hi), hi, "probability")


def kink_shift_hours(estimates: KinkEstimates, p: float, k_prime: float, sample,
                     step: float = QUADRATURE_STEP) -> BoundInterval:
    """Bounds on the change in mean hours if the kink moved from ``k`` to ``k'``.

    Integrates the kink-shift bunching bounds over the path (trapezoid rule
    on a grid no coarser than ``step``), endpoint by endpoint.
    """
    F = _ecdf(sample)
    k = estimates.k
    if k_prime == k:
        return BoundInterval(0.0, 0.0, "hours")
    n = max(1, int(math.ceil(abs(k_prime - k) / step - 1e-9)))
    s = np.linspace(k, k_prime, n + 1)
    bounds = [kink_shift_bunching(estimates, p, float(si), F) for si in s]
    lo = np.trapezoid([b.lower for b in bounds], s) if hasattr(np, "trapezoid") else np.trapz([b.lower for b in bounds], s)
    hi = np.trapezoid([b.upper for b in bounds], s) if hasattr(np, "trapezoid") else np.trapz([b.upper for b in bounds], s)
    return BoundInterval(float(min(lo, hi)), float(max(lo, hi)), "hours")


@dataclass(frozen=True)
class MarginalStatics:
    """Marginal comparative statics at the current policy.

    ``d_bunching_dk`` and ``d_hours_dk`` are point identified; the premium
    derivatives use a constant-elasticity reading of ``E[dh/drho | h]``.
    """

    d_bunching_dk: float
    d_hours_dk: float
    d_bunching_drho: BoundInterval
    d_hours_drho: BoundInterval | None

    def to_dict(self) -> dict:
        return {
            "d_bunching_dk": self.d_bunching_dk,
            "d_hours_dk": self.d_hours_dk,
            "d_bunching_drho": self.d_bunching_drho.to_dict(),
            "d_hours_drho": None if self.d_hours_drho is None else self.d_hours_drho.to_dict(),
        }


def marginal_statics(estimates: KinkEstimates, B: float, p: float, elasticity: BoundInterval,
                     sample=None, rho1: float = 1.5, tol: float = GRID_TOL) -> MarginalStatics:
    """Derivatives of bunching and mean hours with respect to ``k`` and ``rho1``.

    With ``dh/drho = -|e| h / rho1``:

    * ``dB/drho1 = f1(k) k |e| / rho1``
    * ``dE[h]/drho1 = -(|e| / rho1) E[h 1(h > k)]`` (needs ``sample``)
    """
    k = estimates.k
    e_lo, e_hi = elasticity.lower, elasticity.upper
    d_b_drho = BoundInterval(estimates.f_plus * k * e_lo / rho1,
                             estimates.f_plus * k * e_hi / rho1, "probability")
    d_h_drho = None
    if sample is not None:
        h = as_hours(sample)
        above = float(np.where(h > k + tol, h, 0.0).mean())
        d_h_drho = BoundInterval(-e_hi * above / rho1, -e_lo * above / rho1, "hours")
    return MarginalStatics(estimates.f_plus - estimates.f_minus, B - p, d_b_drho, d_h_drho)


def _above(sample, k: float, tol: float) -> np.ndarray:
    h = as_hours(sample)
    return h, h > k + tol


def expost_kink_effect(sample, estimates: KinkEstimates, B: float, p: float,
                       elasticity: BoundInterval, k: float | None = None, rho1: float = 1.5,
                       tol: float = GRID_TOL) -> BoundInterval:
    """Bounds on ``E[h - h0]``, the hours effect of the kink (negative).

    ``E[h - h0] = -(B - p) E[h0 - k | active buncher] - P(h > k) E[h0 - h1 | h > k]``.
    The first expectation uses the h0 halves of the buncher bounds; the
    second is at least the buncher lower bound and at most the
    constant-elasticity response ``h (rho1^|e| - 1)`` at the upper elasticity.
    """
    k = estimates.k if k is None else k
    h, above = _above(sample, k, tol)
    x = B - p
    inp = AteInputs.from_estimates(estimates, p)
    if x > 0:
        ate = buncher_ate_bounds(inp)
        shift_lo = g_fn(inp.F0 - p, inp.f0, x)
        shift_hi = -g_fn(1 - inp.F0, inp.f0, -x)
    else:
        ate = BoundInterval(0.0, 0.0)
        shift_lo = shift_hi = 0.0
    share = above.mean()
    if above.any():
        resp_hi = float(np.mean(h[above] * (rho1 ** elasticity.upper - 1.0)))
    else:
        resp_hi = 0.0
    resp_lo = min(ate.lower, resp_hi)
    lower = -x * shift_hi - share * resp_hi
    upper = -x * shift_lo - share * resp_lo
    return BoundInterval(float(lower), float(upper), "hours")


def wage_effect_upper(sample, elasticity_upper: float, k: float, rho1: float = 1.5,
                      tol: float = GRID_TOL) -> BoundInterval:
    """``[0, mean of 1(h > k) e ln(w*/w) h]`` with ``w*/w = (h + (rho1-1)(h-k)) / h``.

    The upper end assumes straight wages fully offset the premium for the
    hours each worker actually works.
    """
    h, above = _above(sample, k, tol)
    ha = h[above]
    contrib = elasticity_upper * np.log((ha + (rho1 - 1.0) * (ha - k)) / ha) * ha
    return BoundInterval(0.0, float(contrib.sum() / h.size), "hours")


@dataclass(frozen=True)
class PolicyReport:
    effect_of_kink: BoundInterval
    wage_effect: BoundInterval
    total_theta: BoundInterval
    marginal_statics: MarginalStatics | None = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "effect_of_kink": self.effect_of_kink.to_dict(),
            "wage_effect": self.wage_effect.to_dict(),
            "total_theta": self.total_theta.to_dict(),
            "marginal_statics": None if self.marginal_statics is None else self.marginal_statics.to_dict(),
            "metadata": dict(self.metadata),
        }


def flsa_total_effect(effect_of_kink: BoundInterval, wage_effect: BoundInterval,
                      statics: MarginalStatics | None = None, metadata: dict | None = None) -> PolicyReport:
    """Total effect as kink effect plus wage effect; interaction term set to zero."""
    meta = {"interaction_term": 0.0}
    meta.update(metadata or {})
    return PolicyReport(effect_of_kink, wage_effect, effect_of_kink + wage_effect, statics, meta)


def double_time_effect(sample, estimates: KinkEstimates, B: float, p: float,
                       elasticity: BoundInterval, k: float | None = None, rho_bar: float = 2.0,
                       rho1: float = 1.5, rho0: float = 1.0, tol: float = GRID_TOL) -> BoundInterval:
    """Bounds on ``E[h(rho_bar) - h(rho1)]`` when the premium rises to ``rho_bar``.

    Lower magnitude: every worker above the kink responds with the lower
    elasticity, ``h -> max(k, h (rho_bar/rho1)^-|e_lo|)``. Upper magnitude:
    the levels response is at least the one to the original premium and
    bunching grows by ``B - p`` per premium step of ``rho1 - rho0``, with
    new bunchers valued at ``k`` hours; both scale with
    ``(rho_bar - rho1) / (rho1 - rho0)``.
    """
    if rho_bar < rho1:
        raise ValueError("rho_bar must be at least rho1")
    k = estimates.k if k is None else k
    h, above = _above(sample, k, tol)
    if rho_bar == rho1:
        return BoundInterval(0.0, 0.0, "hours")
    ratio = (rho_bar / rho1) ** (-elasticity.lower)
    ha = h[above]
    lower_mag = float(np.sum(ha - np.maximum(k, ha * ratio)) / h.size)
    steps = (rho_bar - rho1) / (rho1 - rho0)
    resp = float(np.sum(ha * (rho1 ** elasticity.upper - 1.0)) / h.size)
    upper_mag = steps * (resp + k * (B - p))
    upper_mag = max(upper_mag, lower_mag)
    return BoundInterval(-upper_mag, -lower_mag, "hours")
