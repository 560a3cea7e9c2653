"""Paycheck panel ingestion, validation, sample filters and lag joins.

The analysis table is a thin immutable wrapper around a pandas DataFrame
with one row per pay period. Columns follow ``CSV_COLUMNS``; any extra
columns in the input (e.g. an industry tag used for grouping) are kept
as strings.
"""

from __future__ import annotations

import io
import os
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Union

import numpy as np
import pandas as pd

from .errors import DataValidationError, EmptySampleError

CSV_COLUMNS = (
    "worker_id",
    "firm_id",
    "week_index",
    "straight_wage",
    "hours_worked",
    "pto_hours",
    "sick_hours",
    "holiday_hours",
    "overtime_hours",
    "pay_frequency",
    "pay_basis",
)
REQUIRED_COLUMNS = (
    "worker_id",
    "firm_id",
    "week_index",
    "straight_wage",
    "hours_worked",
    "pay_frequency",
    "pay_basis",
)
OPTIONAL_HOURS = ("pto_hours", "sick_hours", "holiday_hours", "overtime_hours")
PAY_FREQUENCIES = ("weekly", "biweekly", "semimonthly", "monthly")
PAY_BASES = ("hourly", "salaried")

GRID_STEP = 0.125
SNAP_TOLERANCE = GRID_STEP / 2

Source = Union[str, os.PathLike, bytes, IO]


class DataWarning(UserWarning):
    """Recoverable data issue (defaulted cells, snapped hours)."""


@dataclass(frozen=True)
class SampleFilter:
    require_weekly: bool = False
    require_hourly: bool = False
    require_ever_overtime: bool = False
    require_hours_variation: bool = False

    @classmethod
    def all_on(cls) -> "SampleFilter":
        return cls(True, True, True, True)


@dataclass(frozen=True, eq=False)
class PaycheckTable:
    """Immutable paycheck panel.

    Attributes
    ----------
    frame : pandas.DataFrame
        One row per paycheck, canonical columns first.
    notes : tuple of str
        Warnings raised while building the table, kept for reports.
    """

    frame: pd.DataFrame
    notes: tuple = field(default=())

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def hours(self) -> np.ndarray:
        return self.frame["hours_worked"].to_numpy(dtype=float)

    @property
    def extra_columns(self) -> list:
        return [c for c in self.frame.columns if c not in CSV_COLUMNS and not c.startswith("lag_")]

    @cached_property
    def firm_codes(self) -> np.ndarray:
        """Integer firm code per row (codes follow sorted firm ids)."""
        codes, _ = pd.factorize(self.frame["firm_id"], sort=True)
        return codes.astype(np.int64)

    @cached_property
    def firm_ids(self) -> list:
        return sorted(self.frame["firm_id"].unique().tolist())

    @cached_property
    def firm_index(self) -> dict:
        """Map firm_id to the array of row positions belonging to it."""
        order = np.argsort(self.firm_codes, kind="stable")
        bounds = np.searchsorted(self.firm_codes[order], np.arange(len(self.firm_ids) + 1))
        return {
            fid: order[bounds[j]:bounds[j + 1]] for j, fid in enumerate(self.firm_ids)
        }

    @property
    def n_firms(self) -> int:
        return len(self.firm_ids)

    @property
    def n_workers(self) -> int:
        return int(self.frame["worker_id"].nunique())

    def take(self, rows) -> "PaycheckTable":
        return PaycheckTable(self.frame.iloc[np.asarray(rows)].reset_index(drop=True), self.notes)

    def equals(self, other: "PaycheckTable") -> bool:
        return self.frame.equals(other.frame)


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8")
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _bad(mask: np.ndarray, message: str, column: str):
    if mask.any():
        row = int(np.flatnonzero(mask)[0]) + 1
        raise DataValidationError(message, row=row, field=column)


def _parse_float(raw: pd.Series, column: str, allow_empty: bool) -> tuple:
    text = raw.str.strip()
    empty = (text == "").to_numpy()
    if empty.any() and not allow_empty:
        _bad(empty, "value is required", column)
    filled = text.mask(empty, "0")
    try:
        # astype(float) round-trips shortest reprs exactly; to_numeric does not
        values = filled.astype(float).to_numpy()
    except ValueError:
        coerced = pd.to_numeric(filled, errors="coerce").to_numpy(dtype=float)
        i = int(np.flatnonzero(np.isnan(coerced) & ~empty)[0])
        raise DataValidationError(f"cannot parse number {text.iloc[i]!r}", row=i + 1, field=column) from None
    unparsed = np.isnan(values) & ~empty
    if unparsed.any():
        i = int(np.flatnonzero(unparsed)[0])
        raise DataValidationError(f"cannot parse number {text.iloc[i]!r}", row=i + 1, field=column)
    _bad(~np.isfinite(values), "value must be finite", column)
    return values, int(empty.sum())


def load_paychecks(source: Source, snap: bool = True) -> PaycheckTable:
    """Parse and validate a paycheck CSV.

    Parameters
    ----------
    source : path, bytes or file object
        UTF-8 CSV with the canonical header (extra columns allowed).
    snap : bool
        Snap ``hours_worked`` to the 1/8-hour grid. Disable to keep
        simulated continuous hours exactly.

    Raises
    ------
    DataValidationError
        With the 1-based data row number and the offending field.
    EmptySampleError
        If the input has no data rows.
    """
    text = _read_text(source)
    if not text.strip():
        raise EmptySampleError("input is empty")
    raw = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False, na_filter=False)
    raw.columns = [c.strip() for c in raw.columns]
    missing = [c for c in REQUIRED_COLUMNS if c not in raw.columns]
    if missing:
        raise DataValidationError(f"header is missing required columns {missing}")
    if len(raw) == 0:
        raise EmptySampleError("input has a header but no data rows")
    notes = []

    out = {}
    for col in ("worker_id", "firm_id"):
        ids = raw[col].str.strip()
        _bad((ids == "").to_numpy(), "identifier must be nonempty", col)
        out[col] = ids
    week = pd.to_numeric(raw["week_index"].str.strip(), errors="coerce").to_numpy(dtype=float)
    _bad(~np.isfinite(week) | (week != np.round(week)), "week_index must be an integer", "week_index")
    out["week_index"] = week.astype(np.int64)

    wage, _ = _parse_float(raw["straight_wage"], "straight_wage", allow_empty=False)
    _bad(wage <= 0, "straight_wage must be positive", "straight_wage")
    out["straight_wage"] = wage

    hours, _ = _parse_float(raw["hours_worked"], "hours_worked", allow_empty=False)
    _bad(hours < 0, "hours must be nonnegative", "hours_worked")
    if snap:
        snapped = np.round(hours / GRID_STEP) * GRID_STEP
        dev = np.abs(hours - snapped)
        _bad(dev >= SNAP_TOLERANCE, "hours lie midway between grid points", "hours_worked")
        n_snapped = int((dev > 0).sum())
        if n_snapped:
            msg = f"{n_snapped} hours_worked values snapped to the 1/8-hour grid"
            warnings.warn(msg, DataWarning, stacklevel=2)
            notes.append(msg)
        hours = snapped
    out["hours_worked"] = hours

    for col in OPTIONAL_HOURS:
        if col not in raw.columns:
            msg = f"column {col} absent; defaulted to 0"
            warnings.warn(msg, DataWarning, stacklevel=2)
            notes.append(msg)
            out[col] = np.zeros(len(raw))
            continue
        vals, n_empty = _parse_float(raw[col], col, allow_empty=True)
        _bad(vals < 0, "hours must be nonnegative", col)
        if n_empty:
            msg = f"{n_empty} empty {col} cells defaulted to 0"
            warnings.warn(msg, DataWarning, stacklevel=2)
            notes.append(msg)
        out[col] = vals

    for col, allowed in (("pay_frequency", PAY_FREQUENCIES), ("pay_basis", PAY_BASES)):
        vals = raw[col].str.strip()
        _bad(~vals.isin(allowed).to_numpy(), f"must be one of {allowed}", col)
        out[col] = vals

    frame = pd.DataFrame({c: out[c] for c in CSV_COLUMNS})
    for col in raw.columns:
        if col not in CSV_COLUMNS:
            frame[col] = raw[col].to_numpy()
    dup = frame.duplicated(["worker_id", "week_index"]).to_numpy()
    _bad(dup, "duplicate (worker_id, week_index)", "week_index")
    return PaycheckTable(frame, tuple(notes))


def _fmt_float(x: float) -> str:
    return repr(float(x))


def serialize_paychecks(table: PaycheckTable) -> str:
    """Canonical CSV text; floats use the shortest round-trip repr."""
    frame = table.frame
    cols = list(CSV_COLUMNS) + table.extra_columns
    text = {}
    for col in cols:
        series = frame[col]
        if col in ("straight_wage", "hours_worked") + OPTIONAL_HOURS:
            text[col] = [_fmt_float(v) for v in series.to_numpy(dtype=float)]
        else:
            text[col] = series.astype(str).tolist()
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for row in zip(*(text[c] for c in cols)):
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def write_paychecks(table: PaycheckTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(serialize_paychecks(table))


def apply_sample_filters(table: PaycheckTable, filt: SampleFilter) -> PaycheckTable:
    """Keep rows satisfying every enabled filter.

    Row-level filters (weekly, hourly) run first; worker-level filters
    are then evaluated on the surviving rows and drop whole workers.
    """
    if len(table) == 0:
        raise EmptySampleError("table is empty")
    df = table.frame
    keep = np.ones(len(df), dtype=bool)
    if filt.require_weekly:
        keep &= (df["pay_frequency"] == "weekly").to_numpy()
    if filt.require_hourly:
        keep &= (df["pay_basis"] == "hourly").to_numpy()
    if filt.require_ever_overtime or filt.require_hours_variation:
        sub = df[keep]
        grouped = sub.groupby("worker_id", sort=False)
        ok = pd.Series(True, index=grouped.size().index)
        if filt.require_ever_overtime:
            ok &= grouped["overtime_hours"].max() > 0
        if filt.require_hours_variation:
            span = grouped["hours_worked"].max() - grouped["hours_worked"].min()
            ok &= span >= 1.0
        good = set(ok[ok].index)
        keep &= df["worker_id"].isin(good).to_numpy()
    if not keep.any():
        raise EmptySampleError("all rows removed by sample filters")
    if keep.all():
        return table
    return table.take(np.flatnonzero(keep))


def lag_join(table: PaycheckTable) -> PaycheckTable:
    """Add ``lag_week``, ``lag_hours`` and ``lag_wage`` from each worker's previous paycheck.

    The previous paycheck is the one with the next-smaller week_index for
    the same worker, even across gaps. First paychecks get NaN.
    """
    df = table.frame
    order = np.lexsort((df["week_index"].to_numpy(), df["worker_id"].to_numpy()))
    s = df.iloc[order]
    same = s["worker_id"].to_numpy()[1:] == s["worker_id"].to_numpy()[:-1]
    n = len(df)

    def shifted(col):
        vals = s[col].to_numpy(dtype=float)
        lag = np.full(n, np.nan)
        lag[1:][same] = vals[:-1][same]
        out = np.empty(n)
        out[order] = lag
        return out

    out = df.copy()
    out["lag_week"] = shifted("week_index")
    out["lag_hours"] = shifted("hours_worked")
    out["lag_wage"] = shifted("straight_wage")
    return PaycheckTable(out, table.notes)
