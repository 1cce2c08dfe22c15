"""Probabilistic multiple-choice knapsack used to attribute a power step.

Each class is one appliance; its items are integer candidate ON powers
(weights) with a Gaussian-kernel profit in [0, 100].  Every class also holds
an implicit skip item (weight 0, profit 0), so choosing exactly one item per
class still allows leaving the appliance out.

Selections are ranked by, in order:

1. total item profit, summed in class order;
2. total weight (larger wins);
3. the per-class weight sequence in ascending appliance-id order, compared
   lexicographically with larger weights winning, i.e. selecting a
   lower-id appliance beats leaving it out.

Both :func:`solve` and :func:`brute_force` implement exactly this order.  The
returned ``profit`` is the explained fraction of the capacity,
``100 * sum(weights) / capacity``, which is what the tracker gates on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .models import ApplianceDb, OFF, ON

BRUTE_FORCE_LIMIT = 2 ** 26   # selections; memory is bounded by all-but-last classes


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class MckpClass:
    appliance_id: int
    weights: np.ndarray   # int64, >= 1
    profits: np.ndarray   # float64, in [0, 100]


@dataclass(frozen=True)
class MckpInstance:
    capacity: int
    classes: tuple = ()


@dataclass
class MckpSolution:
    x: dict = field(default_factory=dict)               # appliance id -> 0/1
    chosen_weights: dict = field(default_factory=dict)  # selected id -> watts
    profit: float = 0.0
    objective: float = 0.0

    @property
    def selected(self) -> list[int]:
        return [i for i, v in self.x.items() if v]

    @property
    def total_weight(self) -> int:
        return sum(self.chosen_weights.values())


def kernel_profit(weights, mean, sigma):
    w = np.asarray(weights, dtype=float)
    return 100.0 * np.exp(-((w - mean) ** 2) / (2.0 * sigma ** 2))


def build_instance(delta_abs: float, db: ApplianceDb, direction: str) -> MckpInstance:
    """Classes for the appliances that could produce this step.

    ``direction`` ON considers appliances that are currently OFF and vice
    versa.
    """
    capacity = int(round(abs(delta_abs)))
    wanted = OFF if direction == ON else ON
    classes = []
    for a in sorted(db.appliances, key=lambda a: a.id):
        if a.state != wanted or a.p_on.count == 0:
            continue
        w = a.candidate_powers()
        classes.append(MckpClass(a.id, w.astype(np.int64),
                                 kernel_profit(w, a.p_on.mean, a.p_on.sigma)))
    return MckpInstance(capacity, tuple(classes))


def _finish(instance, seq, objective):
    sol = MckpSolution(objective=float(objective))
    for cls, w in zip(instance.classes, seq):
        sol.x[cls.appliance_id] = int(w > 0)
        if w > 0:
            sol.chosen_weights[cls.appliance_id] = int(w)
    if instance.capacity > 0:
        sol.profit = min(100.0, max(0.0, 100.0 * sol.total_weight / instance.capacity))
    return sol


try:
    from numba import njit
except ImportError:  # pragma: no cover - slow but exact
    def njit(*args, **kwargs):
        return (lambda f: f) if not args or not callable(args[0]) else args[0]


_RANK_LIMIT = 2 ** 62


@njit(cache=True)
def _dense_rank(key, profit):
    order = np.argsort(key, kind="mergesort")
    out = np.zeros(key.size, dtype=np.int64)
    r = -1
    last = -1
    for idx in order:
        if profit[idx] == -np.inf:
            continue
        if r < 0 or key[idx] != last:
            r += 1
            last = key[idx]
        out[idx] = r
    return out


@njit(cache=True)
def _dp_kernel(cap, weights, profits, offsets):
    """Forward DP; returns per-class chosen weight per state and the final state.

    State ``c`` after k classes holds the best prefix selection of total
    weight exactly ``c``.  Besides its profit, each state carries the rank of
    its weight sequence in lexicographic order, so the tie-break never needs
    the sequences themselves.
    """
    n_cls = offsets.size - 1
    neg = -np.inf
    profit = np.full(cap + 1, neg)
    profit[0] = 0.0
    rank = np.zeros(cap + 1, dtype=np.int64)
    choices = np.zeros((n_cls, cap + 1), dtype=np.int64)
    reach = 0   # largest reachable total weight so far
    for k in range(n_cls):
        best_p = profit.copy()      # skip item
        best_r = rank.copy()
        best_w = np.zeros(cap + 1, dtype=np.int64)
        new_reach = reach
        for j in range(offsets[k], offsets[k + 1]):
            w = weights[j]
            if w < 1 or w > cap:
                continue
            pj = profits[j]
            top = min(cap, reach + w)
            if top > new_reach:
                new_reach = top
            for c in range(w, top + 1):
                prev = profit[c - w]
                if prev == neg:
                    continue
                cp = prev + pj
                cr = rank[c - w]
                bp = best_p[c]
                if cp > bp or (cp == bp and (cr > best_r[c] or (cr == best_r[c] and w > best_w[c]))):
                    best_p[c] = cp
                    best_r[c] = cr
                    best_w[c] = w
        # Next rank must order states by (prefix rank, weight chosen here).
        # Pack both into one int64; re-rank densely only when packing would overflow.
        if best_r.max() >= _RANK_LIMIT // (cap + 1):
            best_r = _dense_rank(best_r, best_p)
        new_rank = best_r * (cap + 1) + best_w
        profit = best_p
        rank = new_rank
        choices[k] = best_w
        reach = new_reach
    # final pick: max by (profit, total weight, rank)
    best_c = 0
    for c in range(1, cap + 1):
        if profit[c] == neg:
            continue
        if profit[c] > profit[best_c] or (profit[c] == profit[best_c]
                                          and (c > best_c or (c == best_c and rank[c] > rank[best_c]))):
            best_c = c
    return choices, best_c, profit[best_c]


def solve(instance: MckpInstance) -> MckpSolution:
    """Exact dynamic program over integer capacity (see module docstring)."""
    cap = max(int(instance.capacity), 0)
    classes = sorted(instance.classes, key=lambda c: c.appliance_id)
    instance = MckpInstance(int(instance.capacity), tuple(classes))
    if not classes:
        return _finish(instance, [], 0.0)
    weights = np.concatenate([c.weights for c in classes]).astype(np.int64)
    profits = np.concatenate([c.profits for c in classes]).astype(np.float64)
    offsets = np.cumsum([0] + [c.weights.size for c in classes]).astype(np.int64)
    choices, c, objective = _dp_kernel(cap, weights, profits, offsets)
    seq = []
    for k in range(len(classes) - 1, -1, -1):
        w = int(choices[k, c])
        seq.append(w)
        c -= w
    seq.reverse()
    return _finish(instance, seq, objective)


def brute_force(instance: MckpInstance) -> MckpSolution:
    """Enumerate every one-item-per-class selection (verification oracle).

    Profits of the leading classes are accumulated into flat arrays in class
    order; the last class is then streamed item by item so memory stays at
    the size of that prefix.
    """
    cap = int(instance.capacity)
    classes = sorted(instance.classes, key=lambda c: c.appliance_id)
    instance = MckpInstance(cap, tuple(classes))
    if not classes:
        return _finish(instance, [], 0.0)
    options = []
    size = 1
    for cls in classes:
        w = np.concatenate(([0], cls.weights.astype(np.int64)))
        p = np.concatenate(([0.0], cls.profits.astype(float)))
        options.append((w, p))
        size *= w.size
    if size > BRUTE_FORCE_LIMIT:
        raise InstanceTooLarge(f"{size} selections exceed {BRUTE_FORCE_LIMIT}")

    pre_p = np.zeros(1)
    pre_w = np.zeros(1, dtype=np.int64)
    for w, p in options[:-1]:
        pre_p = (pre_p[:, None] + p[None, :]).ravel()
        pre_w = (pre_w[:, None] + w[None, :]).ravel()
    shape = [w.size for w, _ in options[:-1]]
    last_w, last_p = options[-1]

    best = None   # (profit, weight, seq)
    for j in range(last_w.size):
        tot_w = pre_w + last_w[j]
        feasible = tot_w <= cap
        if not feasible.any():
            continue
        tot_p = np.where(feasible, pre_p + last_p[j], -math.inf)
        top = tot_p.max()
        tied = np.flatnonzero(tot_p == top)
        tied = tied[tot_w[tied] == tot_w[tied].max()]
        for flat in tied.tolist():
            idx = np.unravel_index(flat, shape) if shape else ()
            seq = tuple(int(options[k][0][i]) for k, i in enumerate(idx)) + (int(last_w[j]),)
            key = (float(top), int(tot_w[flat]), seq)
            if best is None or key > best:
                best = key
    if best is None:
        return _finish(instance, [0] * len(classes), 0.0)
    return _finish(instance, list(best[2]), best[0])


# -- text instance format -----------------------------------------------------
# capacity <int>
# class <appliance_id> <w1>:<p1> <w2>:<p2> ...

def read_instance(path, capacity: int | None = None) -> MckpInstance:
    cap = None
    classes = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            if parts[0] == "capacity":
                cap = int(parts[1])
            elif parts[0] == "class":
                items = [tok.split(":") for tok in parts[2:]]
                classes.append(MckpClass(int(parts[1]),
                                         np.array([int(w) for w, _ in items], dtype=np.int64),
                                         np.array([float(p) for _, p in items])))
            else:
                raise ValueError(f"unrecognized instance line: {line.strip()!r}")
    if capacity is not None:
        cap = capacity
    if cap is None:
        raise ValueError("instance has no capacity")
    return MckpInstance(cap, tuple(classes))


def write_instance(instance: MckpInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"capacity {instance.capacity}\n")
        for c in instance.classes:
            items = " ".join(f"{w}:{p!r}" for w, p in zip(c.weights.tolist(), c.profits.tolist()))
            fh.write(f"class {c.appliance_id} {items}\n")
