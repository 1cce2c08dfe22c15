"""Command-line entry point.

Exit codes: 0 success, 1 stage failure, 2 usage error (bad arguments or a
missing input file, in which case nothing is written).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import filters, labelling, mckp, metrics, pipeline, synth, tracker
from .events import detect_events, read_events, write_events
from .models import dump_db, load_db
from .signal_io import PowerTrace, export_trace, load_trace, read_series

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _require_file(path):
    if path is None or not Path(path).is_file():
        raise UsageError(f"input not found: {path}")
    return path


def _require_dir(path):
    if path is None or not Path(path).is_dir():
        raise UsageError(f"directory not found: {path}")
    return path


def _run_config(args) -> pipeline.RunConfig:
    cfg = pipeline.load_run_config(_require_file(args.config)) if getattr(args, "config", None) \
        else pipeline.RunConfig()
    overrides = {k: getattr(args, k, None) for k in ("threshold_s", "profit_gate", "mahalanobis_gate")}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        cfg.tracker = dataclasses.replace(cfg.tracker, **overrides)
    if getattr(args, "region", None):
        cfg.region = args.region
    if getattr(args, "map", None):
        cfg.map_path = _require_file(args.map)
    skip = tuple(st for st in filters.STAGES if getattr(args, f"skip_{st}", False))
    if skip:
        cfg.skip = tuple(dict.fromkeys(cfg.skip + skip))
    if getattr(args, "no_figures", False):
        cfg.figures = False
    return cfg


def _add_tracker_flags(p):
    p.add_argument("--threshold", dest="threshold_s", type=float, help="event threshold in W (default 60)")
    p.add_argument("--profit-gate", type=float, help="knapsack acceptance gate in %% (default 90)")
    p.add_argument("--mahalanobis-gate", type=float, help="re-activation distance gate (default 20)")


def _add_skip_flags(p):
    for st in filters.STAGES:
        p.add_argument(f"--skip-{st.replace('_', '-')}", dest=f"skip_{st}", action="store_true",
                       help=f"bypass the {st} stage")


# -- subcommands ---------------------------------------------------------------

def cmd_synth(args):
    if args.scenario:
        scenario = synth.load_scenario(_require_file(args.scenario))
    else:
        scenario = synth.table2_scenario()
    if args.seed is not None:
        scenario.seed = args.seed
    gen = synth.generate(scenario)
    out = Path(args.out_dir)
    (out / "truth").mkdir(parents=True, exist_ok=True)
    export_trace(gen.aggregate, out / "aggregate.csv")
    for label, tr in gen.truth.items():
        export_trace(tr, out / "truth" / f"{label}.csv")
    with open(out / "energies.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("label,kwh\n")
        for label, kwh in gen.energies.items():
            fh.write(f"{label},{kwh:.9f}\n")
    synth.save_scenario(scenario, out / "scenario.json")
    return EXIT_OK


def cmd_filter(args):
    raw = load_trace(_require_file(args.inp))
    cfg = _run_config(args)
    y = filters.run_pipeline(raw, cfg.filter, skip=cfg.skip)
    export_trace(y, args.out)
    if args.plot:
        from . import plotting
        plotting.plot_filter_comparison(raw.samples, y.samples, args.plot)
    return EXIT_OK


def cmd_events(args):
    y = load_trace(_require_file(args.inp))
    events = detect_events(y, args.threshold)
    if args.out:
        write_events(events, args.out)
    else:
        sys.stdout.write("index,delta,kind\n")
        for e in events:
            sys.stdout.write(f"{e.index},{e.delta:.3f},{e.kind}\n")
    return EXIT_OK


def cmd_disagg(args):
    cfg = _run_config(args)
    y = load_trace(_require_file(args.inp))
    if args.events:
        events = read_events(_require_file(args.events))
    else:
        events = detect_events(y, cfg.tracker.threshold_s)
    db = tracker.ApplianceDb(sample_period=y.sample_period)
    result = tracker.replay_events(events, db, cfg.tracker, y=y)
    pipeline.write_result(result, args.out_dir, y.start_epoch)
    if args.dump_db:
        dump_db(result.db, args.dump_db)
    return EXIT_OK


def _load_result_dir(path, db):
    """Rebuild a DisaggregationResult from ``disagg`` output files."""
    path = Path(path)
    traces = {a.id: read_series(path / f"appliance_{a.id}.csv") for a in db.appliances}
    residual = read_series(path / "residual.csv")
    baseline_path = path / "baseline.csv"
    baseline = read_series(baseline_path) if baseline_path.is_file() else np.zeros(residual.size)
    with open(path / "residual.csv", encoding="utf-8") as fh:
        next(fh, None)
        first = fh.readline().split(",")
    start_epoch = float(first[0]) if first and first[0] else 0.0
    return tracker.DisaggregationResult(db, traces, residual, baseline), start_epoch


def cmd_label(args):
    db = load_db(_require_file(args.db))
    if args.result_dir:
        _require_dir(args.result_dir)
    pmap = labelling.load_partition_map(_require_file(args.map), args.region) if args.map \
        else labelling.builtin_map(args.region)
    assignment = labelling.assign_labels(db, pmap)
    if args.out:
        pipeline.write_labels(assignment, pmap, args.out)
    else:
        sys.stdout.write("appliance_id,label,color\n")
        for aid in assignment.appliance_ids:
            label = assignment.label_of(aid)
            sys.stdout.write(f"{aid},{label},{pmap.color(label)}\n")
    if args.result_dir:
        result, start_epoch = _load_result_dir(args.result_dir, db)
        merged = labelling.merge_same_label(result, assignment)
        out = Path(args.out_dir or Path(args.result_dir).with_name(Path(args.result_dir).name + "_merged"))
        pipeline.write_result(merged, out, start_epoch)
        pipeline.write_labels(assignment, pmap, out / "labels.csv",
                              ids=[a.id for a in merged.db.appliances])
    return EXIT_OK


def _read_labels(path) -> dict:
    labels = {}
    with open(path, encoding="utf-8") as fh:
        next(fh, None)
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) >= 2:
                labels[int(parts[0])] = parts[1]
    return labels


def cmd_eval(args):
    truth_dir = _require_dir(args.truth_dir)
    result_dir = Path(_require_dir(args.result_dir))
    db = load_db(_require_file(result_dir / "db.csv"))
    result, start_epoch = _load_result_dir(result_dir, db)
    labels_path = result_dir / "labels.csv"
    labels = _read_labels(labels_path) if labels_path.is_file() else {}
    truth = pipeline.load_truth_dir(truth_dir)
    filtered = load_trace(_require_file(args.filtered)) if args.filtered else None
    report = metrics.build_report(result, labels, truth=truth, filtered=filtered)
    out = Path(args.out_dir or result_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "report.csv")
    tracked = pipeline._tracked_by_label(result, labels)
    aggregate = filtered
    if aggregate is None:
        total = result.attributed() + result.residual_trace + result.baseline_trace
        aggregate = PowerTrace(np.maximum(total, 0.0), start_epoch, db.sample_period)
    pipeline.write_plot_data(out / "plot_data.csv", tracked, truth, aggregate)
    if not args.no_figures:
        from . import plotting
        plotting.plot_disaggregation(tracked, out / "disaggregation.png",
                                     truth={k: v.samples for k, v in truth.items()},
                                     aggregate=aggregate.samples)
    for row in report.rows():
        acc = "" if row.accuracy is None else f"{row.accuracy:.1f}%"
        sys.stdout.write(f"{row.label}: tracked {row.tracked or 0.0:.3f} kWh {acc}\n")
    return EXIT_OK


def cmd_mckp(args):
    inst = mckp.read_instance(_require_file(args.instance), capacity=args.capacity)
    sol = mckp.solve(inst)
    sys.stdout.write(f"capacity {inst.capacity}\n")
    sys.stdout.write(f"profit {sol.profit:.6f}\nobjective {sol.objective:.6f}\n")
    sys.stdout.write(f"total_weight {sol.total_weight}\n")
    for aid, w in sorted(sol.chosen_weights.items()):
        sys.stdout.write(f"select {aid} {w}\n")
    return EXIT_OK


def cmd_run_all(args):
    _require_file(args.inp)
    if args.truth_dir:
        _require_dir(args.truth_dir)
    cfg = _run_config(args)
    manifest = pipeline.run_all(args.inp, args.out_dir, cfg, truth_dir=args.truth_dir)
    for stage, seconds in manifest.timings:
        sys.stdout.write(f"{stage},{seconds:.6f}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loadtrack", description="Unsupervised load disaggregation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic household with ground truth")
    p.add_argument("--scenario", help="scenario JSON (default: built-in three-appliance scenario)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("filter", help="run the filter pipeline")
    p.add_argument("--config")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", help="also write a raw-vs-filtered PNG")
    _add_skip_flags(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("events", help="detect ON/OFF step events")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--threshold", type=float, default=60.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_events)

    p = sub.add_parser("disagg", help="track appliances over a filtered signal")
    p.add_argument("--config")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--events", help="precomputed events CSV (default: detect from --in)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dump-db")
    _add_tracker_flags(p)
    p.set_defaults(func=cmd_disagg)

    p = sub.add_parser("label", help="label appliances with a partition map")
    p.add_argument("--map", help="partition map file (default: built-in map for --region)")
    p.add_argument("--region", default="NA")
    p.add_argument("--db", required=True)
    p.add_argument("--out", help="labels CSV (default: stdout)")
    p.add_argument("--result-dir", help="disagg output to merge by label")
    p.add_argument("--out-dir", help="merged result directory")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("eval", help="compare tracked energy against ground truth")
    p.add_argument("--truth-dir", required=True)
    p.add_argument("--result-dir", required=True)
    p.add_argument("--filtered", help="filtered aggregate CSV")
    p.add_argument("--out-dir", help="default: the result directory")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mckp", help="solve a knapsack instance file")
    p.add_argument("--capacity", type=int)
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_mckp)

    p = sub.add_parser("run-all", help="filter, track, label and evaluate in one go")
    p.add_argument("--config")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--truth-dir")
    p.add_argument("--region")
    p.add_argument("--map")
    p.add_argument("--no-figures", action="store_true")
    _add_tracker_flags(p)
    _add_skip_flags(p)
    p.set_defaults(func=cmd_run_all)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"loadtrack: {exc}\n")
        return EXIT_USAGE
    except Exception as exc:
        sys.stderr.write(f"loadtrack {args.command}: {exc}\n")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
