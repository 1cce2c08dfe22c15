"""Appliance database: online Gaussian statistics and two-state appliance models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

POWER_SIGMA_FLOOR = 5.0      # watts
DURATION_SIGMA_FLOOR = 0.5   # minutes

ON = "ON"
OFF = "OFF"


class EmptyStat(ValueError):
    pass


class StateError(RuntimeError):
    """A turn_on/turn_off call that contradicts the appliance state."""


class AlreadyOn(StateError):
    pass


class AlreadyOff(StateError):
    pass


@dataclass
class GaussianStat:
    """Welford accumulator for a 1-D Gaussian; ``floor`` bounds sigma on read."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    floor: float = 0.0

    def update(self, x: float) -> "GaussianStat":
        x = float(x)
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)
        return self

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count >= 2 else 0.0

    @property
    def sigma(self) -> float:
        return max(math.sqrt(self.variance), self.floor)

    def pdf(self, x: float) -> float:
        if self.count == 0:
            raise EmptyStat("density of an empty statistic")
        sd = self.sigma
        if sd == 0:
            return math.inf if x == self.mean else 0.0
        z = (x - self.mean) / sd
        return math.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))

    def merged(self, other: "GaussianStat") -> "GaussianStat":
        """Pooled statistic of two samples (parallel-axis combination)."""
        n = self.count + other.count
        if n == 0:
            return GaussianStat(floor=max(self.floor, other.floor))
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return GaussianStat(n, mean, m2, max(self.floor, other.floor))


def gaussian_update(stat: GaussianStat, x: float) -> GaussianStat:
    return stat.update(x)


def gaussian_pdf(stat: GaussianStat, x: float) -> float:
    return stat.pdf(x)


def _power_stat():
    return GaussianStat(floor=POWER_SIGMA_FLOOR)


def _duration_stat():
    return GaussianStat(floor=DURATION_SIGMA_FLOOR)


@dataclass
class ApplianceModel:
    """One discovered appliance.

    ``p_on`` is the ON-step magnitude distribution, ``d_on``/``d_off`` the ON
    and OFF durations in minutes.  ``p_off`` (standby power) is kept for the
    record only; tracking never reads it.  The power trace is stored as
    ON segments ``(start, end, watts)`` and expanded on demand.
    """

    id: int
    state: str = OFF
    p_on: GaussianStat = field(default_factory=_power_stat)
    p_off: GaussianStat = field(default_factory=_power_stat)
    d_on: GaussianStat = field(default_factory=_duration_stat)
    d_off: GaussianStat = field(default_factory=_duration_stat)
    current_power: float = 0.0
    last_transition_index: int | None = None
    segments: list = field(default_factory=list)

    @property
    def is_on(self) -> bool:
        return self.state == ON

    def turn_on(self, index: int, delta: float, period: float = 1.0) -> None:
        if self.is_on:
            raise AlreadyOn(f"appliance {self.id} is already ON at sample {index}")
        if self.last_transition_index is not None:
            self.d_off.update((index - self.last_transition_index) * period / 60.0)
        self.state = ON
        self.current_power = float(abs(delta))
        self.last_transition_index = index

    def turn_off(self, index: int, delta: float | None = None, period: float = 1.0) -> None:
        if not self.is_on:
            raise AlreadyOff(f"appliance {self.id} is already OFF at sample {index}")
        start = self.last_transition_index
        self.p_on.update(self.current_power)
        self.d_on.update((index - start) * period / 60.0)
        self.segments.append((start, index, self.current_power))
        self.state = OFF
        self.current_power = 0.0
        self.last_transition_index = index

    def candidate_powers(self) -> np.ndarray:
        """Integer watt values within three sigma of the ON-power mean (>= 1 W)."""
        if self.p_on.count == 0:
            raise EmptyStat(f"appliance {self.id} has no power observations")
        mu, sd = self.p_on.mean, self.p_on.sigma
        lo = max(1, int(round(mu - 3 * sd)))
        hi = int(round(mu + 3 * sd))
        return np.arange(lo, hi + 1) if hi >= lo else np.arange(0)

    def mahalanobis(self, delta: float) -> float:
        if self.p_on.count == 0:
            raise EmptyStat(f"appliance {self.id} has no power observations")
        return abs(abs(delta) - self.p_on.mean) / self.p_on.sigma

    def trace(self, n_samples: int) -> np.ndarray:
        out = np.zeros(n_samples)
        for start, end, watts in self.segments:
            out[start:end] += watts
        if self.is_on:
            out[self.last_transition_index:] += self.current_power
        return out


def candidate_powers(a: ApplianceModel) -> np.ndarray:
    return a.candidate_powers()


def mahalanobis(a: ApplianceModel, delta: float) -> float:
    return a.mahalanobis(delta)


@dataclass
class ApplianceDb:
    appliances: list = field(default_factory=list)
    min_on_power: float = math.inf
    sample_period: float = 1.0

    def __len__(self):
        return len(self.appliances)

    def __iter__(self):
        return iter(self.appliances)

    def get(self, appliance_id: int) -> ApplianceModel:
        for a in self.appliances:
            if a.id == appliance_id:
                return a
        raise KeyError(appliance_id)

    def add_new(self, delta: float, index: int) -> int:
        """Register a newly discovered appliance, switched ON by ``delta``."""
        new_id = max((a.id for a in self.appliances), default=0) + 1
        a = ApplianceModel(id=new_id)
        a.p_on.update(abs(delta))
        a.state = ON
        a.current_power = float(abs(delta))
        a.last_transition_index = index
        self.appliances.append(a)
        return new_id

    def update_min_power(self, y_t: float) -> None:
        if y_t < self.min_on_power:
            self.min_on_power = float(y_t)

    def on_appliances(self):
        return [a for a in self.appliances if a.is_on]

    def off_appliances(self):
        return [a for a in self.appliances if not a.is_on]


# -- text serialization -------------------------------------------------------

_STAT_NAMES = ("p_on", "p_off", "d_on", "d_off")
DB_COLUMNS = (
    ["id", "state", "current_power", "last_transition_index"]
    + [f"{s}_{f}" for s in _STAT_NAMES for f in ("count", "mean", "m2")]
    + ["segments"]
)


def dump_db(db: ApplianceDb, path) -> None:
    """Write one CSV record per appliance, preceded by ``# key=value`` metadata."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# min_on_power={db.min_on_power!r}\n")
        fh.write(f"# sample_period={db.sample_period!r}\n")
        fh.write(",".join(DB_COLUMNS) + "\n")
        for a in db.appliances:
            row = [str(a.id), a.state, repr(a.current_power),
                   "" if a.last_transition_index is None else str(a.last_transition_index)]
            for name in _STAT_NAMES:
                st = getattr(a, name)
                row += [str(st.count), repr(st.mean), repr(st.m2)]
            row.append(";".join(f"{s}:{e}:{w!r}" for s, e, w in a.segments))
            fh.write(",".join(row) + "\n")


def load_db(path) -> ApplianceDb:
    db = ApplianceDb()
    with open(path, encoding="utf-8") as fh:
        header = None
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, value = line[1:].strip().split("=", 1)
                setattr(db, key, float(value))
                continue
            if header is None:
                header = line.split(",")
                continue
            if not line:
                continue
            rec = dict(zip(header, line.split(",")))
            a = ApplianceModel(id=int(rec["id"]), state=rec["state"],
                               current_power=float(rec["current_power"]))
            lti = rec["last_transition_index"]
            a.last_transition_index = int(lti) if lti else None
            for name in _STAT_NAMES:
                st = getattr(a, name)
                st.count = int(rec[f"{name}_count"])
                st.mean = float(rec[f"{name}_mean"])
                st.m2 = float(rec[f"{name}_m2"])
            if rec.get("segments"):
                for seg in rec["segments"].split(";"):
                    s, e, w = seg.split(":")
                    a.segments.append((int(s), int(e), float(w)))
            db.appliances.append(a)
    return db
