"""One-sided local-polynomial estimates of the CDF level and density at a kink.

The estimator regresses the empirical CDF on powers of ``(h - k)`` with a
triangular kernel, using only observations strictly on one side of ``k``.
The intercept is the one-sided CDF limit and the linear coefficient the
one-sided density.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .empirical_dist import GRID_TOL, EmpiricalCDF, as_hours
from .errors import EstimationError, InsufficientSupportError, PreconditionError, SingularDesignError

SIDES = ("left", "right")

# Boundary equivalent kernel of a local-linear density fit with triangular
# weights on [0, 1]: K*(u) = (6 - 12u)(1 - u). Its roughness and second
# moment enter the plug-in bandwidth.
_EQK_ROUGHNESS = 4.8
_EQK_MU2 = -0.1
_MIN_SIDE_POINTS = 30
# Local quadratic: its leading bias is O(h^2), matching the n^{-1/5} plug-in.
DEFAULT_DEGREE = 2


class EstimationWarning(UserWarning):
    pass


def _as_ecdf(sample) -> EmpiricalCDF:
    return sample if isinstance(sample, EmpiricalCDF) else EmpiricalCDF(as_hours(sample))


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}, got {side!r}")


def _wls(u: np.ndarray, y: np.ndarray, w: np.ndarray, degree: int) -> np.ndarray:
    """Weighted polynomial least squares in ``u`` via Householder QR."""
    sw = np.sqrt(w)
    X = np.vander(u, degree + 1, increasing=True) * sw[:, None]
    Q, R = np.linalg.qr(X, mode="reduced")
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-12 * max(diag.max(), 1e-300):
        raise SingularDesignError("design matrix is rank deficient")
    return solve_triangular(R, Q.T @ (y * sw))


def local_poly_boundary(sample, k: float, side: str, bandwidth: float, degree: int = DEFAULT_DEGREE) -> tuple:
    """One-sided limits ``(F(k±), f(k±))`` from a kernel-weighted ECDF fit.

    Parameters
    ----------
    sample : array_like or EmpiricalCDF
        Full sample; the ECDF is computed over all of it.
    k : float
        Evaluation point.
    side : {"left", "right"}
        Use only observations with ``h < k`` or ``h > k``.
    bandwidth : float
        Kernel half-width in hours.
    degree : int
        Polynomial degree (>= 1).
    """
    _check_side(side)
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    if degree < 1:
        raise ValueError("degree must be at least 1")
    F = _as_ecdf(sample)
    lo, hi = (k - bandwidth, k) if side == "left" else (k, k + bandwidth)
    a, b = F.window(lo, hi)
    x = F.sorted_values[a:b]
    u = (x - k) / bandwidth
    w = (1.0 - np.abs(u)) * F.raw_weights[a:b]
    keep = w > 0
    if keep.sum() < degree + 2:
        raise InsufficientSupportError(
            f"{int(keep.sum())} weighted points on the {side} of {k} within bandwidth {bandwidth}"
        )
    u, w = u[keep], w[keep]
    y = F.ordinates(a, b)[keep]
    if np.unique(u).size < degree + 2:
        raise SingularDesignError(f"fewer than {degree + 2} distinct abscissae on the {side} side")
    coef = _wls(u, y, w, degree)
    return float(coef[0]), float(coef[1] / bandwidth)


def _side_points(F: EmpiricalCDF, k: float, side: str) -> tuple:
    if side == "left":
        a, b = 0, int(np.searchsorted(F.sorted_values, k, side="left"))
    else:
        a, b = int(np.searchsorted(F.sorted_values, k, side="right")), F.n
    return a, b


def pilot_derivatives(sample, k: float, side: str) -> dict:
    """Global quartic fit of the ECDF on one side of ``k``.

    Returns the implied density ``f``, its second derivative ``f2`` at
    ``k``, the side's scale and the residual standard deviation.
    """
    _check_side(side)
    F = _as_ecdf(sample)
    a, b = _side_points(F, k, side)
    w = F.raw_weights[a:b]
    pos = w > 0
    if pos.sum() < _MIN_SIDE_POINTS:
        raise InsufficientSupportError(f"need {_MIN_SIDE_POINTS} points on the {side} side of {k}")
    x = F.sorted_values[a:b][pos]
    y = F.ordinates(a, b)[pos]
    w = w[pos]
    mean = np.average(x, weights=w)
    scale = float(np.sqrt(np.average((x - mean) ** 2, weights=w)))
    if scale <= 0:
        raise SingularDesignError(f"no spread on the {side} side")
    u = (x - k) / scale
    coef = _wls(u, y, w, 4)
    resid = y - np.polyval(coef[::-1], u)
    return {
        "f": float(coef[1] / scale),
        "f2": float(6.0 * coef[3] / scale**3),
        "scale": scale,
        "resid_sd": float(np.sqrt(np.average(resid**2, weights=w))),
        "span": float(abs(x[-1 if side == "right" else 0] - k)),
    }


def side_bandwidth(sample, k: float, side: str) -> float:
    """Plug-in bandwidth for one side (rate n^{-1/5}).

    Minimises the asymptotic MSE of a boundary local-linear density
    estimate, ``(mu2 h^2 f''/2)^2 + R f / (n h)``, with ``f`` and ``f''``
    taken from the quartic pilot. The curvature is floored at a small
    multiple of ``f / scale^2`` so flat pilots do not give unbounded
    bandwidths, and the result is capped at the side's data span.
    """
    F = _as_ecdf(sample)
    pilot = pilot_derivatives(F, k, side)
    f = max(abs(pilot["f"]), 1e-12)
    curv = max(abs(pilot["f2"]), 0.05 * f / pilot["scale"] ** 2)
    n = F.total
    h = (_EQK_ROUGHNESS * f / (_EQK_MU2**2 * curv**2 * n)) ** 0.2
    return float(min(h, pilot["span"]))


def select_bandwidth(sample, k: float) -> float:
    """Average of the left and right plug-in bandwidths."""
    F = _as_ecdf(sample)
    return 0.5 * (side_bandwidth(F, k, "left") + side_bandwidth(F, k, "right"))


@dataclass(frozen=True)
class KinkEstimates:
    """One-sided CDF and density limits at the kink.

    ``F_minus``/``F_plus`` are raw ECDF limits; ``F0``/``F1`` apply the
    counterfactual-buncher correction ``F0 = F_minus + p``.
    """

    k: float
    F_minus: float
    F_plus: float
    f_minus: float
    f_plus: float
    bandwidth: float
    n_left: int
    n_right: int
    p: float = 0.0

    @property
    def B(self) -> float:
        return self.F_plus - self.F_minus

    @property
    def F0(self) -> float:
        return self.F_minus + self.p

    @property
    def F1(self) -> float:
        return self.F_plus

    def with_p(self, p: float) -> "KinkEstimates":
        d = asdict(self)
        d["p"] = float(p)
        return KinkEstimates(**d)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "F_minus": self.F_minus,
            "F_plus": self.F_plus,
            "f_minus": self.f_minus,
            "f_plus": self.f_plus,
            "bandwidth": self.bandwidth,
            "n_left": self.n_left,
            "n_right": self.n_right,
        }


def _warn_other_masses(F: EmpiricalCDF, k: float, bandwidth: float, tol: float) -> None:
    a, b = F.window(k - bandwidth, k + bandwidth)
    vals = F.sorted_values[a:b]
    if vals.size == 0:
        return
    uniq, start = np.unique(vals, return_index=True)
    csum = np.concatenate([[0.0], np.cumsum(F.weights[a:b])])
    ends = np.append(start[1:], vals.size)
    mass = csum[ends] - csum[start]
    away = np.abs(uniq - k) >= tol
    if away.sum() < 3:
        return
    typical = np.median(mass[away])
    big = away & (mass > 0.005) & (mass > 10 * typical)
    if big.any():
        warnings.warn(
            f"bandwidth window around {k} contains point masses at {uniq[big].tolist()}",
            EstimationWarning,
            stacklevel=3,
        )


def kink_estimates(sample, k: float, p: float = 0.0, bandwidth: float | None = None,
                   degree: int = DEFAULT_DEGREE, tol: float = GRID_TOL) -> KinkEstimates:
    """Assemble the sufficient statistics for the buncher-ATE bounds.

    Parameters
    ----------
    sample : PaycheckTable, array or EmpiricalCDF
    k : float
        Kink location.
    p : float
        Counterfactual bunching mass; must not exceed the observed mass.
    bandwidth : float, optional
        Defaults to :func:`select_bandwidth`.
    tol : float
        Values within ``tol`` of ``k`` are the point mass; use a tiny value
        for continuous (unsnapped) data.
    """
    F = _as_ecdf(sample)
    F_minus = F(k - tol)
    F_plus = F.left_limit(k + tol)
    B = F_plus - F_minus
    if p < 0 or p > B + 1e-12:
        raise PreconditionError(f"p = {p} must lie in [0, B = {B}]")
    if bandwidth is None:
        bandwidth = select_bandwidth(F, k)
    _warn_other_masses(F, k, bandwidth, tol)
    _, f_minus = local_poly_boundary(F, k, "left", bandwidth, degree)
    _, f_plus = local_poly_boundary(F, k, "right", bandwidth, degree)
    if f_minus <= 0 or f_plus <= 0:
        raise EstimationError(f"nonpositive density estimate (f_minus={f_minus}, f_plus={f_plus})")
    a, b = F.window(k - bandwidth, k)
    c, d = F.window(k, k + bandwidth)
    return KinkEstimates(
        k=float(k),
        F_minus=float(F_minus),
        F_plus=float(F_plus),
        f_minus=f_minus,
        f_plus=f_plus,
        bandwidth=float(bandwidth),
        n_left=b - a,
        n_right=d - c,
        p=float(p),
    )


@dataclass(frozen=True)
class BlcDiagnostic:
    side: str
    grid: np.ndarray
    F_hat: np.ndarray
    d2_log_F: np.ndarray
    d2_log_survival: np.ndarray
    max_violation: float
    location: float
    noise_se: float

    @property
    def within_noise(self) -> bool:
        return self.max_violation <= 3.0 * self.noise_se

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "max_violation": self.max_violation,
            "location": self.location,
            "noise_se": self.noise_se,
            "within_noise": self.within_noise,
            "grid": self.grid.tolist(),
            "d2_log_F": self.d2_log_F.tolist(),
            "d2_log_survival": self.d2_log_survival.tolist(),
        }


def _smoothed_cdf(F: EmpiricalCDF, grid: np.ndarray, region: tuple, bandwidth: float) -> np.ndarray:
    out = np.empty(grid.size)
    for i, x in enumerate(grid):
        lo, hi = max(x - bandwidth, region[0]), min(x + bandwidth, region[1])
        a, b = F.window(lo, hi)
        u = (F.sorted_values[a:b] - x) / bandwidth
        w = (1.0 - np.abs(u)) * F.raw_weights[a:b]
        keep = w > 0
        try:
            if np.unique(u[keep]).size < 3:
                raise SingularDesignError("too few points")
            out[i] = _wls(u[keep], F.ordinates(a, b)[keep], w[keep], 1)[0]
        except SingularDesignError:
            out[i] = F(x)
    return np.clip(out, 1e-12, 1 - 1e-12)


def _second_diff(grid: np.ndarray, y: np.ndarray) -> np.ndarray:
    h1 = np.diff(grid)[:-1]
    h2 = np.diff(grid)[1:]
    return 2.0 * (h1 * y[2:] - (h1 + h2) * y[1:-1] + h2 * y[:-2]) / (h1 * h2 * (h1 + h2))


def _violations(F, grid, region, bandwidth):
    Fh = _smoothed_cdf(F, grid, region, bandwidth)
    d2a = _second_diff(grid, np.log(Fh))
    d2b = _second_diff(grid, np.log1p(-Fh))
    return Fh, d2a, d2b


def blc_diagnostic(sample, k: float, side: str, grid, bandwidth: float | None = None,
                   n_boot: int = 30, seed: int = 0) -> BlcDiagnostic:
    """Check concavity of ln F and ln(1 - F) on one side of ``k``.

    The CDF is smoothed by local-linear fits restricted to the side, and
    second divided differences of both logs are computed on ``grid``.
    Positive values violate bi-log-concavity. ``noise_se`` is the
    bootstrap standard error of the second difference where the worst
    violation occurs.
    """
    _check_side(side)
    F = _as_ecdf(sample)
    grid = np.sort(np.asarray(grid, dtype=float))
    if grid.size < 3:
        raise ValueError("grid needs at least 3 points")
    region = (-np.inf, k) if side == "left" else (k, np.inf)
    if bandwidth is None:
        try:
            bandwidth = side_bandwidth(F, k, side)
        except EstimationError:
            bandwidth = max(float(np.ptp(grid)) / 4, 1e-6)
    Fh, d2a, d2b = _violations(F, grid, region, bandwidth)
    worst = np.maximum(d2a, d2b)
    j = int(np.argmax(worst))
    max_violation = float(max(worst[j], 0.0))
    rng = np.random.default_rng(seed)
    reps = []
    for _ in range(n_boot):
        counts = np.bincount(rng.integers(0, F.n, F.n), minlength=F.n)
        G = F.reweight(_row_counts(F, counts))
        _, ba, bb = _violations(G, grid[j:j + 3], region, bandwidth)
        reps.append(max(ba[0], bb[0]))
    noise = float(np.std(reps, ddof=1)) if n_boot >= 2 else 0.0
    return BlcDiagnostic(side, grid, Fh, d2a, d2b, max_violation, float(grid[j + 1]), noise)


def _row_counts(F: EmpiricalCDF, sorted_counts: np.ndarray) -> np.ndarray:
    # reweight() expects weights in original row order
    out = np.empty(F.n)
    out[F._order] = sorted_counts * F.raw_weights
    return out
