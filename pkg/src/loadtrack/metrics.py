"""Energy integration and tracking accuracy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signal_io import PowerTrace

UNKNOWN = "unknown"


class ZeroTruthEnergy(ZeroDivisionError):
    pass


def energy_kwh(trace, sample_period: float | None = None) -> float:
    """Left Riemann sum of power in W over the sample period, in kWh."""
    if isinstance(trace, PowerTrace):
        period = trace.sample_period if sample_period is None else sample_period
        samples = trace.samples
    else:
        period = 1.0 if sample_period is None else sample_period
        samples = np.asarray(trace, dtype=float)
    return float(samples.sum()) * period / 3.6e6


def _as_kwh(x, period=None):
    if isinstance(x, (int, float, np.floating)):
        return float(x)
    return energy_kwh(x, period)


def accuracy(estimate, truth) -> float:
    """``100 * energy(estimate) / energy(truth)``; not clamped."""
    t = _as_kwh(truth)
    if t <= 0:
        raise ZeroTruthEnergy("truth energy must be positive")
    return 100.0 * _as_kwh(estimate) / t


@dataclass
class ReportRow:
    label: str
    truth: float | None = None
    filtered: float | None = None
    tracked: float | None = None

    @property
    def accuracy(self) -> float | None:
        if self.truth is None or self.tracked is None or self.truth <= 0:
            return None
        return accuracy(self.tracked, self.truth)

    @property
    def accuracy_vs_filtered(self) -> float | None:
        if self.filtered is None or self.tracked is None or self.filtered <= 0:
            return None
        return accuracy(self.tracked, self.filtered)


@dataclass
class EnergyReport:
    per_label: dict = field(default_factory=dict)   # label -> ReportRow
    aggregate: ReportRow = field(default_factory=lambda: ReportRow("Aggregate"))

    def rows(self):
        return list(self.per_label.values()) + [self.aggregate]

    def to_csv(self, path) -> None:
        def fmt(v):
            return "" if v is None else f"{v:.6f}"

        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("label,truth_kwh,filtered_kwh,tracked_kwh,accuracy_pct,accuracy_vs_filtered_pct\n")
            for r in self.rows():
                fh.write(",".join([r.label, fmt(r.truth), fmt(r.filtered), fmt(r.tracked),
                                   fmt(r.accuracy), fmt(r.accuracy_vs_filtered)]) + "\n")


def tracked_by_label(result, labels: dict | None = None, period: float = 1.0) -> dict:
    """Sum tracked energy per label; ``labels`` maps appliance id -> label."""
    out = {}
    for aid, tr in result.per_appliance_traces.items():
        label = (labels or {}).get(aid, f"appliance_{aid}")
        out[label] = out.get(label, 0.0) + energy_kwh(tr, period)
    return out


def build_report(result, labels: dict | None = None, truth: dict | None = None,
                 filtered: PowerTrace | None = None, filtered_truth: dict | None = None,
                 sample_period: float | None = None) -> EnergyReport:
    """Assemble per-label and aggregate energy rows.

    ``truth`` and ``filtered_truth`` map label -> trace (or kWh).  The
    aggregate row's truth is the sum of the per-label truths and its tracked
    value the sum over tracked appliances; ``filtered`` is the filtered
    aggregate.  Columns whose inputs are missing stay empty.
    """
    if sample_period is None:
        sample_period = result.db.sample_period
    tracked = tracked_by_label(result, labels, sample_period)
    truth_kwh = {k: _as_kwh(v, sample_period) for k, v in (truth or {}).items()}
    filt_kwh = {k: _as_kwh(v, sample_period) for k, v in (filtered_truth or {}).items()}

    report = EnergyReport()
    for label in list(truth_kwh) + [k for k in tracked if k not in truth_kwh]:
        report.per_label[label] = ReportRow(
            label,
            truth=truth_kwh.get(label),
            filtered=filt_kwh.get(label),
            tracked=tracked.get(label, 0.0),
        )
    agg = report.aggregate
    agg.tracked = sum(tracked.values())
    if truth_kwh:
        agg.truth = sum(truth_kwh.values())
    if filtered is not None:
        agg.filtered = _as_kwh(filtered, sample_period)
    return report
