"""End-to-end run: filter -> track -> label -> evaluate, with per-stage timings."""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import filters, labelling, metrics, tracker
from .events import detect_events, write_events
from .models import dump_db
from .signal_io import PowerTrace, export_trace, load_trace, write_series

STAGE_ROWS = (
    ("median", "1a. Median Filter"),
    ("bilateral", "1b. Bilateral Filter"),
    ("anisotropic", "1c. Anisotropic Filter"),
    ("domain_transform", "1d. Edge-Preserving Filter"),
    ("sharpen", "1e. Edge Sharpening"),
    ("filter", "1. Filter Pipeline"),
    ("tracking", "2. Appliance Tracking"),
    ("labelling", "3. Appliance Labelling"),
    ("total", "Total Run-Time"),
)


class StageFailure(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunConfig:
    filter: filters.FilterConfig = field(default_factory=filters.FilterConfig)
    tracker: tracker.TrackerConfig = field(default_factory=tracker.TrackerConfig)
    region: str = "NA"
    map_path: str | None = None
    skip: tuple = ()
    figures: bool = True

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        values = dict(values)
        tr = {}
        for key in ("threshold_s", "profit_gate", "mahalanobis_gate"):
            if key in values:
                tr[key] = float(values.pop(key))
        skip = tuple(s.strip() for s in values.pop("skip", "").split() if s.strip())
        figures = str(values.pop("figures", "true")).lower() not in ("0", "false", "no")
        return cls(
            filter=filters.FilterConfig.from_mapping(values),
            tracker=tracker.TrackerConfig(**tr),
            region=values.pop("region", "NA"),
            map_path=values.pop("map", None) or None,
            skip=skip,
            figures=figures,
        )

    def to_mapping(self) -> dict:
        out = dict(self.filter.to_mapping())
        out.update(threshold_s=self.tracker.threshold_s, profit_gate=self.tracker.profit_gate,
                   mahalanobis_gate=self.tracker.mahalanobis_gate, region=self.region,
                   map=self.map_path or "", skip=" ".join(self.skip), figures=self.figures)
        return out

    def partition_map(self) -> labelling.PartitionMap:
        if self.map_path:
            return labelling.load_partition_map(self.map_path, self.region)
        return labelling.builtin_map(self.region)


def load_run_config(path) -> RunConfig:
    return RunConfig.from_mapping(filters.read_flat_config(path))


@dataclass
class RunManifest:
    config: dict
    input_hashes: dict
    timings: list = field(default_factory=list)     # (stage row name, seconds)
    outputs: list = field(default_factory=list)
    status: str = "ok"
    error: str = ""

    def write(self, out_dir) -> None:
        out_dir = Path(out_dir)
        _atomic_write(out_dir / "manifest.csv",
                      "stage,seconds\n" + "".join(f"{s},{t:.6f}\n" for s, t in self.timings))
        _atomic_write(out_dir / "manifest.json", json.dumps({
            "config": self.config,
            "input_hashes": self.input_hashes,
            "timings": [{"stage": s, "seconds": t} for s, t in self.timings],
            "outputs": self.outputs,
            "status": self.status,
            "error": self.error,
        }, indent=2, default=str))


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_result(result: tracker.DisaggregationResult, out_dir, start_epoch=0.0):
    """Per-appliance CSVs, residual, db dump and decision audit log."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    period = result.db.sample_period
    written = []
    for aid, tr in result.per_appliance_traces.items():
        p = out_dir / f"appliance_{aid}.csv"
        write_series(tr, p, start_epoch, period)
        written.append(str(p))
    for name, series in (("residual.csv", result.residual_trace), ("baseline.csv", result.baseline_trace)):
        write_series(series, out_dir / name, start_epoch, period)
        written.append(str(out_dir / name))
    dump_db(result.db, out_dir / "db.csv")
    tracker.write_audit_log(result, out_dir / "audit.csv")
    written += [str(out_dir / "db.csv"), str(out_dir / "audit.csv")]
    return written


def write_labels(assignment, pmap, path, ids=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("appliance_id,label,color\n")
        for aid in ids or assignment.appliance_ids:
            label = assignment.label_of(aid)
            color = pmap.color(label) if label != metrics.UNKNOWN else "black"
            fh.write(f"{aid},{label},{color}\n")


def load_truth_dir(path) -> dict:
    """Every ``<label>.csv`` in ``path`` becomes a ground-truth trace."""
    truth = {}
    for p in sorted(Path(path).glob("*.csv")):
        truth[p.stem] = load_trace(p)
    return truth


def run_all(input_path, out_dir, config: RunConfig | None = None, truth_dir=None) -> RunManifest:
    """Run every stage and write outputs plus ``manifest.csv``/``manifest.json``.

    Raises :class:`FileNotFoundError` before touching ``out_dir`` when the
    input is missing, and :class:`StageFailure` (after writing a partial
    manifest) when a stage fails.
    """
    config = config or RunConfig()
    if not Path(input_path).is_file():
        raise FileNotFoundError(input_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    hashes = {str(input_path): sha256_file(input_path)}
    manifest = RunManifest(config=config.to_mapping(), input_hashes=hashes)
    names = dict(STAGE_ROWS)
    t_start = time.perf_counter()
    stage = "load"
    try:
        raw = load_trace(input_path)

        stage = "filter"
        stage_times = {}
        t0 = time.perf_counter()
        y = filters.run_pipeline(raw, config.filter, skip=config.skip, timings=stage_times)
        t_filter = time.perf_counter() - t0
        for key in filters.STAGES:
            manifest.timings.append((names[key], stage_times[key]))
        manifest.timings.append((names["filter"], t_filter))
        export_trace(y, out_dir / "filtered.csv")
        manifest.outputs.append(str(out_dir / "filtered.csv"))

        stage = "tracking"
        t0 = time.perf_counter()
        events = detect_events(y, config.tracker.threshold_s)
        db = tracker.ApplianceDb(sample_period=y.sample_period)
        result = tracker.replay_events(events, db, config.tracker, y=y)
        manifest.timings.append((names["tracking"], time.perf_counter() - t0))
        write_events(events, out_dir / "events.csv")
        manifest.outputs.append(str(out_dir / "events.csv"))
        manifest.outputs += write_result(result, out_dir / "raw_result", raw.start_epoch)

        stage = "labelling"
        t0 = time.perf_counter()
        pmap = config.partition_map()
        assignment = labelling.assign_labels(result.db, pmap)
        merged = labelling.merge_same_label(result, assignment)
        labels = labelling.merged_labels(assignment, merged)
        manifest.timings.append((names["labelling"], time.perf_counter() - t0))
        write_labels(assignment, pmap, out_dir / "labels.csv")
        manifest.outputs.append(str(out_dir / "labels.csv"))
        manifest.outputs += write_result(merged, out_dir / "merged_result", raw.start_epoch)
        write_labels(assignment, pmap, out_dir / "merged_result" / "labels.csv",
                     ids=[a.id for a in merged.db.appliances])

        stage = "evaluation"
        truth = load_truth_dir(truth_dir) if truth_dir else None
        report = metrics.build_report(merged, labels, truth=truth, filtered=y)
        report.to_csv(out_dir / "report.csv")
        manifest.outputs.append(str(out_dir / "report.csv"))
        tracked = _tracked_by_label(merged, labels)
        write_plot_data(out_dir / "plot_data.csv", tracked, truth, y)
        manifest.outputs.append(str(out_dir / "plot_data.csv"))
        if config.figures:
            manifest.outputs += render_figures(out_dir, raw, y, tracked, truth, pmap)
    except Exception as exc:
        manifest.status = "failed"
        manifest.error = f"{stage}: {exc}"
        manifest.write(out_dir)
        raise StageFailure(stage, exc) from exc
    manifest.timings.append((names["total"], time.perf_counter() - t_start))
    manifest.write(out_dir)
    return manifest


def _tracked_by_label(result, labels) -> dict:
    out = {}
    for aid, tr in result.per_appliance_traces.items():
        label = labels.get(aid, f"appliance_{aid}")
        if label == metrics.UNKNOWN:
            label = f"unknown_{aid}"
        out[label] = out.get(label, 0) + tr
    return out


def write_plot_data(path, tracked: dict, truth: dict | None, aggregate: PowerTrace) -> None:
    """Aligned columns: sample index, aggregate, tracked total, then per-label pairs."""
    import numpy as np

    n = len(aggregate)
    total = np.zeros(n)
    for tr in tracked.values():
        total += tr
    cols = {"index": np.arange(n), "aggregate": aggregate.samples, "tracked_total": total}
    for label, tr in tracked.items():
        cols[f"tracked:{label}"] = tr
    for label, tr in (truth or {}).items():
        cols[f"truth:{label}"] = tr.samples[:n]
    names = list(cols)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        data = np.column_stack([np.asarray(cols[c], dtype=float) for c in names])
        np.savetxt(fh, data, delimiter=",", fmt="%.3f")


def render_figures(out_dir, raw, y, tracked, truth, pmap) -> list:
    from . import plotting

    out_dir = Path(out_dir)
    colors = {c.label: c.color for c in pmap.cells}
    paths = [
        plotting.plot_filter_comparison(raw.samples, y.samples, out_dir / "filter.png"),
        plotting.plot_disaggregation(
            tracked, out_dir / "disaggregation.png",
            truth={k: v.samples for k, v in truth.items()} if truth else None,
            aggregate=y.samples, colors=colors),
    ]
    return [str(p) for p in paths]
