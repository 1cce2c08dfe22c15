"""Region-specific partition maps: (mean ON duration, mean ON power) -> label."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .metrics import UNKNOWN
from .models import ApplianceDb, ApplianceModel, ON, OFF
from .tracker import DisaggregationResult

MAX_DURATION = 1440.0   # minutes
MAX_POWER = 20000.0     # watts


class MapError(ValueError):
    pass


class OverlappingCells(MapError):
    pass


class UnknownRegion(MapError):
    pass


class MalformedCell(MapError):
    pass


@dataclass(frozen=True)
class Cell:
    d_min: float
    d_max: float
    p_min: float
    p_max: float
    label: str
    color: str

    def contains(self, duration, power) -> bool:
        return self.d_min <= duration < self.d_max and self.p_min <= power < self.p_max

    def overlaps(self, other: "Cell") -> bool:
        return (self.d_min < other.d_max and other.d_min < self.d_max
                and self.p_min < other.p_max and other.p_min < self.p_max)


@dataclass
class PartitionMap:
    region: str
    cells: list = field(default_factory=list)
    max_duration: float = MAX_DURATION
    max_power: float = MAX_POWER

    def validate(self) -> "PartitionMap":
        for c in self.cells:
            if not (0 <= c.d_min < c.d_max <= self.max_duration
                    and 0 <= c.p_min < c.p_max <= self.max_power):
                raise MalformedCell(f"cell out of bounds or empty: {c}")
            if c.label == UNKNOWN:
                raise MalformedCell(f"'{UNKNOWN}' is reserved")
        for i, a in enumerate(self.cells):
            for b in self.cells[i + 1:]:
                if a.overlaps(b):
                    raise OverlappingCells(f"{a.label!r} overlaps {b.label!r} in region {self.region}")
        return self

    def cell_at(self, duration, power) -> Cell | None:
        for c in self.cells:
            if c.contains(duration, power):
                return c
        return None

    def lookup(self, duration, power) -> str:
        c = self.cell_at(duration, power)
        return c.label if c else UNKNOWN

    def color(self, label) -> str:
        for c in self.cells:
            if c.label == label:
                return c.color
        return "black"


def _read_cells(lines, source):
    by_region = {}
    for lineno, rec in enumerate(csv.reader(lines), start=1):
        if not rec or rec[0].lstrip().startswith("#"):
            continue
        if len(rec) != 7:
            raise MalformedCell(f"{source}:{lineno}: expected 7 fields, got {len(rec)}")
        region, d0, d1, p0, p1, label, color = (f.strip() for f in rec)
        try:
            cell = Cell(float(d0), float(d1), float(p0), float(p1), label, color)
        except ValueError:
            raise MalformedCell(f"{source}:{lineno}: non-numeric bound in {rec!r}") from None
        by_region.setdefault(region, []).append(cell)
    return by_region


def load_partition_map(path, region: str) -> PartitionMap:
    with open(path, encoding="utf-8", newline="") as fh:
        by_region = _read_cells(fh, path)
    return _select(by_region, region, path)


def builtin_map(region: str = "NA") -> PartitionMap:
    """Load one of the maps shipped with the package (``NA``, ``UK``)."""
    name = f"{region.lower()}.pmap"
    ref = resources.files("loadtrack") / "maps" / name
    if not ref.is_file():
        raise UnknownRegion(f"no built-in map for region {region!r}")
    by_region = _read_cells(ref.read_text(encoding="utf-8").splitlines(), name)
    return _select(by_region, region, name)


def _select(by_region, region, source):
    if region not in by_region:
        # a file may legitimately hold a region with zero cells only via a comment-only file
        if not by_region:
            return PartitionMap(region)
        raise UnknownRegion(f"region {region!r} not in {source} (have {sorted(by_region)})")
    return PartitionMap(region, by_region[region]).validate()


def write_partition_map(pmap: PartitionMap, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# region,d_min,d_max,p_min,p_max,label,color\n")
        for c in pmap.cells:
            fh.write(f"{pmap.region},{c.d_min:g},{c.d_max:g},{c.p_min:g},{c.p_max:g},{c.label},{c.color}\n")


@dataclass
class LabelAssignment:
    labels: list                 # label set, first-seen order
    appliance_ids: list          # column order of every indicator vector
    vectors: dict                # label -> list of 0/1 over appliance_ids

    def label_of(self, appliance_id) -> str:
        col = self.appliance_ids.index(appliance_id)
        for label, vec in self.vectors.items():
            if vec[col]:
                return label
        raise KeyError(appliance_id)

    def as_dict(self) -> dict:
        return {aid: self.label_of(aid) for aid in self.appliance_ids}


def label_for(appliance: ApplianceModel, pmap: PartitionMap) -> str:
    if appliance.d_on.count == 0 or appliance.p_on.count == 0:
        return UNKNOWN
    return pmap.lookup(appliance.d_on.mean, appliance.p_on.mean)


def assign_labels(db: ApplianceDb, pmap: PartitionMap) -> LabelAssignment:
    ids = [a.id for a in db.appliances]
    per_app = [label_for(a, pmap) for a in db.appliances]
    labels = list(dict.fromkeys(per_app))
    vectors = {lab: [int(p == lab) for p in per_app] for lab in labels}
    return LabelAssignment(labels, ids, vectors)


def _merge_models(group, new_id):
    merged = ApplianceModel(id=new_id)
    for name in ("p_on", "p_off", "d_on", "d_off"):
        stat = getattr(group[0], name)
        for other in group[1:]:
            stat = stat.merged(getattr(other, name))
        setattr(merged, name, stat)
    on = [a for a in group if a.is_on]
    merged.state = ON if on else OFF
    merged.current_power = sum(a.current_power for a in on)
    transitions = [a.last_transition_index for a in group if a.last_transition_index is not None]
    merged.last_transition_index = max(transitions) if transitions else None
    merged.segments = sorted(s for a in group for s in a.segments)
    return merged


def merge_same_label(result: DisaggregationResult, assignment: LabelAssignment) -> DisaggregationResult:
    """Fold appliances that share a (non-``unknown``) label into one.

    The merged appliance keeps the lowest id; its trace is the per-sample sum
    of the members' traces and its statistics are pooled.
    """
    by_id = {a.id: a for a in result.db.appliances}
    groups = {}
    for aid in assignment.appliance_ids:
        label = assignment.label_of(aid)
        key = ("u", aid) if label == UNKNOWN else ("l", label)
        groups.setdefault(key, []).append(aid)

    db = ApplianceDb(min_on_power=result.db.min_on_power, sample_period=result.db.sample_period)
    traces = {}
    for members in sorted(groups.values(), key=min):
        if len(members) == 1:
            aid = members[0]
            db.appliances.append(by_id[aid])
            traces[aid] = result.per_appliance_traces[aid]
            continue
        keep = min(members)
        db.appliances.append(_merge_models([by_id[m] for m in members], keep))
        total = np.zeros(result.n_samples)
        for m in members:
            total = total + result.per_appliance_traces[m]
        traces[keep] = total
    return DisaggregationResult(db, traces, result.residual_trace, result.baseline_trace,
                                list(result.decisions))


def merged_labels(assignment: LabelAssignment, merged: DisaggregationResult) -> dict:
    """Label per appliance id of a merged result."""
    labels = assignment.as_dict()
    return {a.id: labels[a.id] for a in merged.db.appliances}
