"""Univariate KPI time series: CSV ingestion, validation, gap filling, segments.

A :class:`TimeSeries` is immutable after construction (its arrays are marked
read-only) so instances can be shared freely across threads; every transform
returns a new instance.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DuplicateTimestamp, EmptySeries, MalformedRow

DEFAULT_SCHEMA: Mapping[str, str] = {
    "timestamp": "timestamp",
    "value": "value",
    "label": "label",
}


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def modal_interval(timestamps: np.ndarray) -> int:
    """Most common difference of consecutive timestamps (0 when n < 2).

    Count ties resolve to the smallest difference so the result is
    deterministic.
    """
    if len(timestamps) < 2:
        return 0
    diffs = np.diff(timestamps)
    counts = Counter(diffs.tolist())
    best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
    return int(best[0])


@dataclass(frozen=True)
class TimeSeries:
    """Timestamped univariate sequence with optional {0,1} ground-truth labels.

    ``synthetic`` flags points inserted by :func:`fill_gaps`; such points are
    never offered for labeling.
    """

    id: str
    timestamps: np.ndarray
    values: np.ndarray
    labels: np.ndarray | None = None
    sampling_interval: int = 0
    synthetic: np.ndarray | None = None

    def __post_init__(self):
        ts = np.ascontiguousarray(self.timestamps, dtype=np.int64)
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if len(ts) == 0:
            raise EmptySeries(f"series {self.id!r} has no points")
        if len(ts) != len(vals):
            raise ValueError("timestamps and values differ in length")
        if len(ts) > 1 and not np.all(np.diff(ts) > 0):
            raise ValueError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "values", _frozen(vals))
        if self.labels is not None:
            labels = np.ascontiguousarray(self.labels, dtype=np.int8)
            if len(labels) != len(ts):
                raise ValueError("labels length does not match series length")
            if not np.all((labels == 0) | (labels == 1)):
                raise ValueError("labels must be 0 or 1")
            object.__setattr__(self, "labels", _frozen(labels))
        if self.synthetic is not None:
            synth = np.ascontiguousarray(self.synthetic, dtype=bool)
            if len(synth) != len(ts):
                raise ValueError("synthetic flags length does not match")
            object.__setattr__(self, "synthetic", _frozen(synth))
        if self.sampling_interval == 0:
            object.__setattr__(self, "sampling_interval", modal_interval(ts))

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    @property
    def synthetic_mask(self) -> np.ndarray:
        """Boolean mask of gap-filled points (all-False when none exist)."""
        if self.synthetic is None:
            return np.zeros(self.n, dtype=bool)
        return self.synthetic


def _parse_timestamp(raw: str, row_num: int) -> int:
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        as_float = float(raw)
    except ValueError as exc:
        raise MalformedRow(f"row {row_num}: bad timestamp {raw!r}") from exc
    if not as_float.is_integer():
        raise MalformedRow(f"row {row_num}: non-integer timestamp {raw!r}")
    return int(as_float)


def _parse_value(raw: str, row_num: int) -> float:
    try:
        val = float(raw)
    except (TypeError, ValueError) as exc:
        raise MalformedRow(f"row {row_num}: non-numeric value {raw!r}") from exc
    if not np.isfinite(val):
        raise MalformedRow(f"row {row_num}: non-finite value {raw!r}")
    return val


def _parse_label(raw: str, row_num: int) -> int:
    try:
        val = float(raw)
    except (TypeError, ValueError) as exc:
        raise MalformedRow(f"row {row_num}: bad label {raw!r}") from exc
    if val not in (0.0, 1.0):
        raise MalformedRow(f"row {row_num}: label {raw!r} not in {{0,1}}")
    return int(val)


def load_csv(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    series_id: str | None = None,
) -> TimeSeries:
    """Load a KPI series from a headered CSV file.

    ``schema`` maps the roles ``timestamp``/``value``/``label`` to column
    names (defaults: those same names). The label column is optional; rows
    are sorted by timestamp; duplicate timestamps are rejected.
    """
    path = Path(path)
    cols = dict(DEFAULT_SCHEMA)
    if schema:
        cols.update(schema)

    rows: list[tuple[int, float, int]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fieldnames = reader.fieldnames or []
        for role in ("timestamp", "value"):
            if cols[role] not in fieldnames:
                raise MalformedRow(
                    f"column {cols[role]!r} for {role} not found in {path.name}"
                )
        has_label = cols["label"] in fieldnames
        for row_num, row in enumerate(reader, start=2):
            t = _parse_timestamp(row[cols["timestamp"]], row_num)
            v = _parse_value(row[cols["value"]], row_num)
            lab = _parse_label(row[cols["label"]], row_num) if has_label else 0
            rows.append((t, v, lab))

    if not rows:
        raise EmptySeries(f"{path.name} contains no data rows")
    rows.sort(key=lambda r: r[0])
    stamps = np.array([r[0] for r in rows], dtype=np.int64)
    dupes = stamps[1:][np.diff(stamps) == 0]
    if dupes.size:
        raise DuplicateTimestamp(f"duplicate timestamp {int(dupes[0])} in {path.name}")

    return TimeSeries(
        id=series_id or path.stem,
        timestamps=stamps,
        values=np.array([r[1] for r in rows], dtype=np.float64),
        labels=np.array([r[2] for r in rows], dtype=np.int8) if has_label else None,
    )


def write_csv(
    ts: TimeSeries, path: str | Path, schema: Mapping[str, str] | None = None
) -> None:
    """Write a series back to CSV (inverse of :func:`load_csv`)."""
    cols = dict(DEFAULT_SCHEMA)
    if schema:
        cols.update(schema)
    header = [cols["timestamp"], cols["value"]]
    if ts.labels is not None:
        header.append(cols["label"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ts.n):
            row = [int(ts.timestamps[i]), repr(float(ts.values[i]))]
            if ts.labels is not None:
                row.append(int(ts.labels[i]))
            writer.writerow(row)


def fill_gaps(ts: TimeSeries) -> TimeSeries:
    """Insert every missing multiple of the sampling interval.

    Inserted values are linear interpolations of their neighbors, inserted
    labels are 0, and inserted points carry the ``synthetic`` flag so they
    are excluded from query batches. Original points are never altered.
    Returns the input unchanged when the interval is unknown (n == 1).
    """
    step = ts.sampling_interval
    if step <= 0:
        return ts
    grid = np.arange(ts.timestamps[0], ts.timestamps[-1] + 1, step, dtype=np.int64)
    missing = grid[~np.isin(grid, ts.timestamps)]
    if missing.size == 0:
        return ts

    new_stamps = np.concatenate([ts.timestamps, missing])
    order = np.argsort(new_stamps, kind="stable")
    new_stamps = new_stamps[order]

    filled_vals = np.interp(missing, ts.timestamps, ts.values)
    new_vals = np.concatenate([ts.values, filled_vals])[order]

    new_labels = None
    if ts.labels is not None:
        new_labels = np.concatenate(
            [ts.labels, np.zeros(missing.size, dtype=np.int8)]
        )[order]

    synth = np.concatenate([ts.synthetic_mask, np.ones(missing.size, dtype=bool)])
    return TimeSeries(
        id=ts.id,
        timestamps=new_stamps,
        values=new_vals,
        labels=new_labels,
        sampling_interval=step,
        synthetic=synth[order],
    )


def extract_segments(labels: Sequence[int] | np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of label 1 as inclusive (start, end) index pairs."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return []
    padded = np.concatenate([[0], (labels != 0).astype(np.int8), [0]])
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))
