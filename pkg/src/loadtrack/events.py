"""ON/OFF event detection on a filtered power signal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_io import PowerTrace

DEFAULT_THRESHOLD = 60.0
COALESCE_SAMPLES = 2

ON = "ON"
OFF = "OFF"


class TraceTooShort(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    index: int
    delta: float
    time: float = 0.0

    @property
    def kind(self) -> str:
        return ON if self.delta > 0 else OFF


def detect_events(y, s: float = DEFAULT_THRESHOLD) -> list[Event]:
    """Return one event per step with ``|y[t] - y[t-1]| >= s``.

    Same-direction super-threshold steps at most ``COALESCE_SAMPLES`` apart
    are merged into a single event carrying the net change over the span;
    this catches an edge the sharpening stage left straddling two samples.
    """
    if not s > 0:
        raise ValueError("threshold must be positive")
    period = 1.0
    if isinstance(y, PowerTrace):
        period = y.sample_period
        y = y.samples
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        raise TraceTooShort("need at least two samples to differentiate")
    d = np.diff(y)
    hits = np.flatnonzero(np.abs(d) >= s) + 1  # sample index where the step lands

    events = []
    start = end = None
    for idx in hits:
        if start is not None and idx - end <= COALESCE_SAMPLES \
                and np.sign(d[idx - 1]) == np.sign(d[end - 1]):
            end = idx
            continue
        if start is not None:
            events.append(_make(y, start, end, period))
        start = end = idx
    if start is not None:
        events.append(_make(y, start, end, period))
    return [e for e in events if abs(e.delta) >= s]


def _make(y, start, end, period):
    delta = float(y[end] - y[start - 1])
    return Event(index=int(start), delta=delta, time=start * period)


def write_events(events, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,delta,kind\n")
        for e in events:
            fh.write(f"{e.index},{e.delta:.3f},{e.kind}\n")


def read_events(path) -> list[Event]:
    events = []
    with open(path, encoding="utf-8") as fh:
        next(fh, None)
        for line in fh:
            line = line.strip()
            if line:
                idx, delta, _ = line.split(",")
                events.append(Event(index=int(idx), delta=float(delta)))
    return events
