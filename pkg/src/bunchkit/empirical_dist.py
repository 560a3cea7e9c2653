"""Empirical CDF, point-mass detection and histograms over hours."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import EstimationError

# Half of the 1/8-hour recording grid: values this close to k count as "at k".
GRID_TOL = 1.0 / 16.0


def as_hours(data) -> np.ndarray:
    """Accept a PaycheckTable, a DataFrame with ``hours_worked`` or an array."""
    if hasattr(data, "hours") and not isinstance(data, np.ndarray):
        return np.asarray(data.hours, dtype=float)
    if isinstance(data, pd.DataFrame):
        return data["hours_worked"].to_numpy(dtype=float)
    return np.asarray(data, dtype=float).ravel()


class EmpiricalCDF:
    """Right-continuous (optionally weighted) empirical CDF.

    The sort is done once; :meth:`reweight` reuses it, which is what makes
    cluster-bootstrap replicates cheap (a resampled panel is the original
    panel with integer multiplicity weights).

    Parameters
    ----------
    values : array_like
        Sample, in original row order.
    weights : array_like, optional
        Nonnegative row weights in original row order. Normalised
        internally; ``None`` means equal weights.
    """

    def __init__(self, values, weights=None, _order=None):
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            raise EstimationError("empirical CDF of an empty sample")
        if not np.all(np.isfinite(values)):
            raise EstimationError("sample contains non-finite values")
        order = np.argsort(values, kind="stable") if _order is None else _order
        self._order = order
        self.sorted_values = values[order]
        self.n = values.size
        self._raw = None
        if weights is None:
            self._cum = None
            self.total = float(self.n)
            self.weights = np.full(self.n, 1.0 / self.n)
        else:
            w = np.asarray(weights, dtype=float).ravel()
            if w.shape != values.shape or np.any(w < 0) or not np.all(np.isfinite(w)):
                raise EstimationError("weights must be finite, nonnegative and match the sample")
            ws = w[order]
            self._raw = ws
            self._cum = np.cumsum(ws)
            self.total = float(self._cum[-1])
            if self.total <= 0:
                raise EstimationError("weights sum to zero")
            self.weights = ws / self.total

    def reweight(self, row_weights) -> "EmpiricalCDF":
        """Same sample, new row weights (original row order)."""
        new = EmpiricalCDF.__new__(EmpiricalCDF)
        w = np.asarray(row_weights, dtype=float)[self._order]
        new._order = self._order
        new.sorted_values = self.sorted_values
        new.n = self.n
        new._raw = w
        new._cum = np.cumsum(w)
        new.total = float(new._cum[-1])
        if new.total <= 0:
            raise EstimationError("weights sum to zero")
        new.weights = w / new.total
        return new

    def transformed(self, fn) -> "EmpiricalCDF":
        """Apply a strictly increasing map to the support, keeping weights and order."""
        new = EmpiricalCDF.__new__(EmpiricalCDF)
        new.__dict__.update(self.__dict__)
        new.sorted_values = np.asarray(fn(self.sorted_values), dtype=float)
        return new

    @property
    def raw_weights(self) -> np.ndarray:
        """Unnormalised weights in sorted order (ones when unweighted)."""
        return np.ones(self.n) if self._raw is None else self._raw

    def _mass_below(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx)
        if self._cum is None:
            return idx / self.n
        out = np.zeros(idx.shape)
        pos = idx > 0
        out[pos] = self._cum[idx[pos] - 1] / self.total
        return out

    def __call__(self, x):
        idx = np.searchsorted(self.sorted_values, x, side="right")
        out = self._mass_below(idx)
        return float(out) if np.ndim(out) == 0 else out

    def left_limit(self, x):
        """lim_{y -> x-} F(y)."""
        idx = np.searchsorted(self.sorted_values, x, side="left")
        out = self._mass_below(idx)
        return float(out) if np.ndim(out) == 0 else out

    def ordinates(self, lo: int = 0, hi: int | None = None) -> np.ndarray:
        """F evaluated at sorted_values[lo:hi] (ties resolved right-continuously)."""
        vals = self.sorted_values[lo:hi]
        return self._mass_below(np.searchsorted(self.sorted_values, vals, side="right"))

    def window(self, lo: float, hi: float) -> tuple:
        """Index range of sorted values strictly inside (lo, hi)."""
        a = int(np.searchsorted(self.sorted_values, lo, side="right"))
        b = int(np.searchsorted(self.sorted_values, hi, side="left"))
        return a, max(a, b)


def ecdf(hours, weights=None) -> EmpiricalCDF:
    """Empirical CDF of ``hours`` (table, frame or array)."""
    return EmpiricalCDF(as_hours(hours), weights)


@dataclass(frozen=True)
class BunchingStats:
    k: float
    mass: float
    n_at_k: int
    n_total: int


def bunching_mass(data, k: float, tol: float = GRID_TOL, mask=None, weights=None) -> BunchingStats:
    """Share of rows with ``|hours - k| < tol``.

    ``mask`` restricts to a subsample (e.g. rows with PTO) and ``weights``
    gives row multiplicities; both are in row order.
    """
    h = as_hours(data)
    at = np.abs(h - k) < tol
    w = np.ones(h.size) if weights is None else np.asarray(weights, dtype=float)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        at = at & mask
        w = np.where(mask, w, 0.0)
    total = float(w.sum())
    n_total = int(mask.sum()) if mask is not None else h.size
    if total <= 0:
        return BunchingStats(float(k), 0.0, 0, n_total)
    return BunchingStats(float(k), float(w[at].sum() / total), int(at.sum()), n_total)


def histogram(data, bin_width: float, range: tuple | None = None, k: float | None = None,
              align: str = "boundary") -> pd.DataFrame:
    """Histogram with edges aligned to ``k``.

    Parameters
    ----------
    bin_width : float
        Positive bin width in hours.
    range : (lo, hi), optional
        Rows outside are ignored; defaults to the data range.
    k : float, optional
        Anchor; defaults to 0.
    align : {"boundary", "center"}
        Whether ``k`` is a bin edge or a bin center.

    Returns
    -------
    DataFrame with columns ``bin_left, bin_right, count, share``; ``share``
    is relative to the rows inside ``range``.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    if align not in ("boundary", "center"):
        raise ValueError("align must be 'boundary' or 'center'")
    h = as_hours(data)
    lo, hi = (float(h.min()), float(h.max())) if range is None else map(float, range)
    anchor = (0.0 if k is None else float(k)) - (bin_width / 2 if align == "center" else 0.0)
    first = np.floor((lo - anchor) / bin_width)
    last = np.floor((hi - anchor) / bin_width)
    n_bins = int(last - first) + 1
    edges = anchor + (first + np.arange(n_bins + 1)) * bin_width
    inside = h[(h >= lo) & (h <= hi)]
    idx = np.floor((inside - anchor) / bin_width).astype(np.int64) - int(first)
    idx = np.clip(idx, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    share = counts / inside.size if inside.size else np.zeros(n_bins)
    return pd.DataFrame(
        {"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts, "share": share}
    )
