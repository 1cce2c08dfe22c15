"""Power trace container and CSV interchange (``unix_ts,watts`` rows)."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

MAX_GAP_SAMPLES = 10
DEFAULT_PERIOD = 1.0


class TraceError(ValueError):
    """Base class for trace loading/validation problems."""


class MalformedRow(TraceError):
    pass


class GapTooLarge(TraceError):
    pass


class NonMonotoneTime(TraceError):
    pass


class EmptyTrace(TraceError):
    pass


@dataclass(frozen=True, eq=False)
class PowerTrace:
    """Uniformly sampled real-power signal in watts."""

    samples: np.ndarray
    start_epoch: float = 0.0
    sample_period: float = 1.0

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if arr.ndim != 1:
            raise TraceError("samples must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise TraceError("samples must be finite")
        if arr.size and arr.min() < 0:
            raise TraceError("power samples must be non-negative")
        if not self.sample_period > 0:
            raise TraceError("sample_period must be positive")

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, PowerTrace):
            return NotImplemented
        return (
            self.start_epoch == other.start_epoch
            and self.sample_period == other.sample_period
            and np.array_equal(self.samples, other.samples)
        )

    @property
    def timestamps(self) -> np.ndarray:
        return self.start_epoch + np.arange(len(self)) * self.sample_period

    def replace(self, samples) -> "PowerTrace":
        """Same timing, new samples."""
        return PowerTrace(samples, self.start_epoch, self.sample_period)


def _format_number(value: float) -> str:
    # Three decimals when that round-trips exactly, shortest repr otherwise.
    short = f"{value:.3f}"
    if float(short) == value:
        return short
    return repr(float(value))


def _parse_rows(path, ts_col, power_col):
    rows = []
    seen_record = False
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, rec in enumerate(reader, start=1):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if rec[0].lstrip().startswith("#"):
                continue
            try:
                ts = float(rec[ts_col])
                watts = float(rec[power_col])
            except (ValueError, IndexError):
                if not seen_record:
                    seen_record = True
                    continue  # header
                raise MalformedRow(f"{path}:{lineno}: cannot parse {rec!r}") from None
            seen_record = True
            if not (np.isfinite(ts) and np.isfinite(watts)) or watts < 0:
                raise MalformedRow(f"{path}:{lineno}: invalid value in {rec!r}")
            rows.append((ts, watts))
    return rows


def _resolve_columns(column_spec, path):
    if column_spec is None:
        return 0, 1
    ts_col = column_spec.get("timestamp", 0)
    power_col = column_spec.get("power", 1)
    if isinstance(ts_col, int) and isinstance(power_col, int):
        return ts_col, power_col
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    header = [h.strip() for h in header]
    try:
        if not isinstance(ts_col, int):
            ts_col = header.index(ts_col)
        if not isinstance(power_col, int):
            power_col = header.index(power_col)
    except ValueError as exc:
        raise MalformedRow(f"{path}: column not found in header {header}") from exc
    return ts_col, power_col


def load_trace(path, column_spec: Mapping[str, int | str] | None = None,
               sample_period: float | None = None) -> PowerTrace:
    """Read a ``timestamp,watts`` CSV into a gap-free :class:`PowerTrace`.

    ``column_spec`` maps ``"timestamp"``/``"power"`` to column indices or
    header names (default columns 0 and 1).  The sample period is the median
    timestamp step; with fewer than two steps there is nothing to take a
    median of and the default of 1 s applies unless ``sample_period`` is
    given.  Gaps of up to
    ``MAX_GAP_SAMPLES`` missing samples are filled by holding the previous
    value; longer gaps raise :class:`GapTooLarge`.
    """
    ts_col, power_col = _resolve_columns(column_spec, path)
    rows = _parse_rows(path, ts_col, power_col)
    if not rows:
        raise EmptyTrace(f"{path}: no data rows")
    ts = np.array([r[0] for r in rows])
    watts = np.array([r[1] for r in rows])
    steps = np.diff(ts)
    if np.any(steps < 0):
        bad = int(np.argmax(steps < 0)) + 1
        raise NonMonotoneTime(f"{path}: timestamp decreases at data row {bad + 1}")
    positive = steps[steps > 0]
    if sample_period is not None:
        period = float(sample_period)
    elif positive.size >= 2:
        # Absorb float noise from serialized start + i*period timestamps.
        period = float(f"{float(np.median(positive)):.9g}")
    else:
        period = DEFAULT_PERIOD
    if not period > 0:
        raise TraceError("sample_period must be positive")

    slots = np.rint((ts - ts[0]) / period).astype(np.int64)
    n = int(slots[-1]) + 1
    out = np.empty(n)
    filled = np.zeros(n, dtype=bool)
    # Later rows win on duplicate timestamps.
    out[slots] = watts
    filled[slots] = True
    missing = np.flatnonzero(~filled)
    if missing.size:
        run_starts = np.flatnonzero(np.diff(np.concatenate(([-2], missing))) != 1)
        run_ends = np.concatenate((run_starts[1:], [missing.size]))
        longest = int((run_ends - run_starts).max())
        if longest > MAX_GAP_SAMPLES:
            raise GapTooLarge(f"{path}: gap of {longest} samples exceeds {MAX_GAP_SAMPLES}")
        for i in missing:
            out[i] = out[i - 1]
    return PowerTrace(out, start_epoch=float(ts[0]), sample_period=period)


def write_series(values: Sequence[float], path, start_epoch=0.0, sample_period=1.0) -> None:
    """Write any real-valued series (negatives allowed) in trace CSV layout."""
    values = np.asarray(values, dtype=float)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("unix_ts,watts\n")
        for i, v in enumerate(values):
            fh.write(f"{_format_number(start_epoch + i * sample_period)},{_format_number(v)}\n")
    os.replace(tmp, path)


def export_trace(trace: PowerTrace, path) -> None:
    if len(trace) == 0:
        raise EmptyTrace("refusing to export an empty trace")
    write_series(trace.samples, path, trace.start_epoch, trace.sample_period)


def read_series(path) -> np.ndarray:
    """Read back the value column written by :func:`write_series`."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1].copy() if data.size else np.zeros(0)
