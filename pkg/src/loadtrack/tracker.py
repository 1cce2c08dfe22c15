"""Online appliance discovery and tracking over a filtered aggregate signal.

For each ON/OFF event the tracker first asks the knapsack which appliances
(in the opposite state) explain the step.  A confident answer (explained
fraction above ``profit_gate``) switches all selected appliances.  Otherwise
an OFF step switches off the single most likely ON appliance, and an ON step
either re-activates the nearest OFF appliance (Mahalanobis distance below
``mahalanobis_gate``) or registers a new appliance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import mckp
from .events import DEFAULT_THRESHOLD, detect_events
from .models import ApplianceDb, OFF, ON
from .signal_io import PowerTrace

log = logging.getLogger(__name__)

PATH_MCKP = "MCKP"
PATH_MAHALANOBIS = "MAHALANOBIS"
PATH_NEW = "NEW"
PATH_FALLBACK = "FALLBACK"
PATH_IGNORED = "IGNORED"


@dataclass(frozen=True)
class TrackerConfig:
    threshold_s: float = DEFAULT_THRESHOLD
    profit_gate: float = 90.0
    mahalanobis_gate: float = 20.0

    def __post_init__(self):
        if not self.threshold_s > 0:
            raise ValueError("threshold_s must be positive")
        if not 0 < self.profit_gate <= 100:
            raise ValueError("profit_gate must lie in (0, 100]")
        if not self.mahalanobis_gate > 0:
            raise ValueError("mahalanobis_gate must be positive")


@dataclass
class Decision:
    index: int
    delta: float
    path: str
    profit: float
    appliances: tuple = ()


@dataclass
class DisaggregationResult:
    db: ApplianceDb
    per_appliance_traces: dict          # appliance id -> ndarray (watts)
    residual_trace: np.ndarray
    baseline_trace: np.ndarray          # running minimum power
    decisions: list = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return self.residual_trace.size

    def attributed(self) -> np.ndarray:
        total = np.zeros(self.n_samples)
        for tr in self.per_appliance_traces.values():
            total += tr
        return total


def _split_power(chosen: dict, delta_abs: float) -> dict:
    """Scale the knapsack's integer weights so they sum to the observed step."""
    total = sum(chosen.values())
    return {aid: w * delta_abs / total for aid, w in chosen.items()}


def _handle_off(db, ev, cfg, period):
    delta_abs = abs(ev.delta)
    on = db.on_appliances()
    if not on:
        log.info("OFF step of %.1f W at %d with nothing ON; ignored", ev.delta, ev.index)
        return Decision(ev.index, ev.delta, PATH_IGNORED, 0.0)
    sol = mckp.solve(mckp.build_instance(delta_abs, db, OFF))
    if sol.profit > cfg.profit_gate:
        for aid in sol.selected:
            db.get(aid).turn_off(ev.index, ev.delta, period)
        return Decision(ev.index, ev.delta, PATH_MCKP, sol.profit, tuple(sol.selected))
    best = max(on, key=lambda a: (a.p_on.pdf(delta_abs), -a.id))
    best.turn_off(ev.index, ev.delta, period)
    return Decision(ev.index, ev.delta, PATH_FALLBACK, sol.profit, (best.id,))


def _handle_on(db, ev, cfg, period):
    delta_abs = abs(ev.delta)
    sol = mckp.solve(mckp.build_instance(delta_abs, db, ON))
    if sol.profit > cfg.profit_gate:
        for aid, watts in _split_power(sol.chosen_weights, delta_abs).items():
            db.get(aid).turn_on(ev.index, watts, period)
        return Decision(ev.index, ev.delta, PATH_MCKP, sol.profit, tuple(sol.selected))
    off = db.off_appliances()
    if off:
        nearest = min(off, key=lambda a: (a.mahalanobis(delta_abs), a.id))
        if nearest.mahalanobis(delta_abs) < cfg.mahalanobis_gate:
            nearest.turn_on(ev.index, delta_abs, period)
            return Decision(ev.index, ev.delta, PATH_MAHALANOBIS, sol.profit, (nearest.id,))
    new_id = db.add_new(delta_abs, ev.index)
    return Decision(ev.index, ev.delta, PATH_NEW, sol.profit, (new_id,))


def replay_events(events, db: ApplianceDb | None = None, config: TrackerConfig | None = None,
                  y=None, n_samples: int | None = None) -> DisaggregationResult:
    """Run the decision logic over a precomputed, index-ordered event list.

    ``y`` (array or PowerTrace) supplies the aggregate for the running
    minimum and the residual; without it the residual is minus the
    attributed power and the baseline is zero.
    """
    cfg = config or TrackerConfig()
    db = db if db is not None else ApplianceDb()
    period = db.sample_period
    if isinstance(y, PowerTrace):
        period = db.sample_period = y.sample_period
        y = y.samples
    if y is not None:
        y = np.asarray(y, dtype=float)
        n_samples = y.size
    elif n_samples is None:
        n_samples = (max(e.index for e in events) + 1) if events else 0

    decisions = []
    last = -1
    for ev in events:
        if ev.index < last:
            raise ValueError("events must be ordered by index")
        last = ev.index
        if abs(ev.delta) < cfg.threshold_s:
            continue
        if ev.delta < 0:
            decisions.append(_handle_off(db, ev, cfg, period))
        else:
            decisions.append(_handle_on(db, ev, cfg, period))

    traces = {a.id: a.trace(n_samples) for a in db.appliances}
    attributed = np.zeros(n_samples)
    for tr in traces.values():
        attributed += tr
    if y is not None and n_samples:
        baseline = np.minimum.accumulate(y)
        db.update_min_power(float(baseline[-1]))
        residual = y - attributed - baseline
    else:
        baseline = np.zeros(n_samples)
        residual = -attributed
    return DisaggregationResult(db, traces, residual, baseline, decisions)


def track(y, config: TrackerConfig | None = None) -> DisaggregationResult:
    """Detect events on the filtered signal ``y`` and track appliances."""
    cfg = config or TrackerConfig()
    events = detect_events(y, cfg.threshold_s)
    db = ApplianceDb()
    if isinstance(y, PowerTrace):
        db.sample_period = y.sample_period
    return replay_events(events, db, cfg, y=y)


def write_audit_log(result: DisaggregationResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,delta,path,profit,appliances\n")
        for d in result.decisions:
            ids = " ".join(str(i) for i in d.appliances)
            fh.write(f"{d.index},{d.delta:.3f},{d.path},{d.profit:.3f},{ids}\n")

