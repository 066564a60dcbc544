"""Exact weighted halfspace sampling with expected-time guarantees.

Points are split into factor-2 weight classes.  For a query h:

1. the group-search index finds the heaviest class ``i`` that meets h;
2. classes ``i .. i'-1`` (``i'`` is the first class lighter than class i by a
   factor n^2) each contribute a candidate set ``Y_l``: the conflict list of
   the covering triangle in that class's level hierarchy, which is a superset
   of the class's points in h.  Everything from ``i'`` on is one lumped
   candidate set whose total is the precomputed suffix weight;
3. a top alias over the candidate-set totals picks a set, the set's alias
   picks a point, and the point is kept iff it lies in h.

Every point of h is proposed with probability proportional to its weight,
so accepted draws are exact.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .core import AliasTable, Dataset, RandomSource, alias_build
from .errors import EmptyRange, LevelOverflow, NotFound
from .geom3d import GroupMaxIndex, HalfspaceQuery, dual_planes, dualize_query
from .shallow_cutting import K_MIN, Hierarchy
from .weight_partition import WeightClassPartition, build_half_classes, cutoff_index


@dataclass
class Candidate:
    """One slot of the top-level alias: a point set with its own alias."""

    ids: np.ndarray | None
    table: AliasTable | None
    total: float
    exact: bool = False
    lazy: bool = False


@dataclass
class QueryPlan:
    query: HalfspaceQuery
    first_class: int
    cutoff: int
    slots: list
    top: AliasTable
    stats: dict = field(default_factory=dict)


class ExpectedSampler:
    def __init__(self, dataset: Dataset, rng: RandomSource | None = None, *, k_min: int = K_MIN,
                 cutoff_ratio: float | None = None, check_superset: bool = False):
        rng = rng or RandomSource(0)
        self.dataset = dataset
        self.n = n = dataset.n
        self.k_min = k_min
        self.cutoff_ratio = float(n) ** 2 if cutoff_ratio is None else float(cutoff_ratio)
        self.check_superset = check_superset
        self.partition: WeightClassPartition = build_half_classes(dataset)
        self.group_index = GroupMaxIndex(dataset.pos, self.partition.classes)
        self.hier: list[dict[bool, Hierarchy]] = []
        for li, ids in enumerate(self.partition.classes):
            w = dataset.weights[ids]
            per = {}
            for mirrored in (False, True):
                planes = dual_planes(dataset.pos[ids], mirrored)
                per[mirrored] = Hierarchy(planes, w, rng.spawn(2 * li + mirrored), k_min=k_min)
            self.hier.append(per)
        self._lock = threading.Lock()
        self.reset_stats()

    # -- instrumentation -------------------------------------------------
    def reset_stats(self) -> None:
        self._stats = {"queries": 0, "rounds": 0, "accepted": 0, "retries": 0,
                       "case1_hits": 0, "fallback_scans": 0, "exact_filters": 0}

    def query_stats(self) -> dict:
        s = dict(self._stats)
        s["mean_rounds"] = s["rounds"] / s["accepted"] if s["accepted"] else 0.0
        s["case1_frequency"] = s["case1_hits"] / s["rounds"] if s["rounds"] else 0.0
        return s

    def _merge(self, local: dict) -> None:
        with self._lock:
            for key, v in local.items():
                self._stats[key] = self._stats.get(key, 0) + v

    def space(self) -> int:
        """Stored alias entries plus conflict-list entries."""
        total = 0
        for per in self.hier:
            for h in per.values():
                total += h.conflict_entries() + h.alias_entries()
        return total

    # -- query -----------------------------------------------------------
    def _class_candidate(self, li: int, h: HalfspaceQuery, q, mirrored, stats) -> Candidate:
        ids = self.partition.classes[li]
        hier = self.hier[li][mirrored]
        try:
            lev, tri = hier.query(q)
        except LevelOverflow:
            if hier.levels:
                stats["fallback_scans"] += 1
                return Candidate(ids, hier.full_alias, hier.full_total)
            lev, local = None, hier.full_ids
        else:
            if lev > 0:
                level = hier.levels[lev]
                local = level.conflicts[tri]
                if self.check_superset:
                    self._assert_superset(ids, local, h)
                return Candidate(ids[local], level.alias[tri], level.conflict_total[tri])
            local = hier.levels[0].conflicts[tri]
        # small conflict list: keep exactly the points in h
        stats["exact_filters"] += 1
        gids = ids[local]
        if self.check_superset:
            self._assert_superset(ids, local, h)
        gids = gids[h.contains(self.dataset.pos[gids])]
        if len(gids) == 0:
            return Candidate(gids, None, 0.0, exact=True)
        w = self.dataset.weights[gids]
        return Candidate(gids, alias_build(w), math.fsum(w.tolist()), exact=True)

    def _assert_superset(self, ids, local, h):
        inside = ids[h.contains(self.dataset.pos[ids])]
        assert np.isin(inside, ids[local]).all(), "conflict list misses a point of h"

    def plan(self, h: HalfspaceQuery, stats: dict | None = None) -> QueryPlan:
        stats = stats if stats is not None else {k: 0 for k in self._stats}
        try:
            i = self.group_index.first_nonempty(h)
        except NotFound:
            raise EmptyRange("halfspace contains no point") from None
        part = self.partition
        i2 = cutoff_index(part, i, self.cutoff_ratio)
        q, mirrored = dualize_query(h)
        slots = [self._class_candidate(li, h, q, mirrored, stats) for li in range(i, i2)]
        if i2 < part.t:
            slots.append(Candidate(None, None, part.suffix_total[i2], lazy=True))
        totals = [s.total for s in slots]
        keep = [j for j, t in enumerate(totals) if t > 0]
        slots = [slots[j] for j in keep]
        top = alias_build([s.total for s in slots])
        return QueryPlan(h, i, i2, slots, top, stats)

    def _materialize(self, plan: QueryPlan, j: int) -> None:
        slot = plan.slots[j]
        if slot.table is None:
            ids = self.partition.members_from(plan.cutoff)
            slot.ids = ids
            slot.table = alias_build(self.dataset.weights[ids])

    def _propose(self, plan: QueryPlan, m: int, rng: RandomSource) -> tuple[np.ndarray, np.ndarray]:
        which = plan.top.sample_many(rng, m)
        cand = np.empty(m, dtype=np.int64)
        for j in np.unique(which).tolist():
            mask = which == j
            self._materialize(plan, j)
            slot = plan.slots[j]
            cand[mask] = slot.ids[slot.table.sample_many(rng, int(mask.sum()))]
        return which, cand

    def sample(self, h: HalfspaceQuery, k: int, rng: RandomSource) -> np.ndarray:
        """k independent draws from h, each point with probability w(p)/w(h)."""
        local = {key: 0 for key in self._stats}
        plan = self.plan(h, local)
        local["queries"] += 1
        out = np.empty(k, dtype=np.int64)
        got = 0
        lazy = [j for j, s in enumerate(plan.slots) if s.lazy]
        rate = 0.5
        while got < k:
            need = k - got
            m = min(max(16, int(need / rate * 1.25) + 8), 1 << 20)
            which, cand = self._propose(plan, m, rng)
            hit = np.flatnonzero(h.contains(self.dataset.pos[cand]))
            used = m if len(hit) < need else int(hit[need - 1]) + 1
            take = hit[:need]
            out[got : got + len(take)] = cand[take]
            got += len(take)
            local["rounds"] += used
            local["accepted"] += len(take)
            if lazy:
                local["case1_hits"] += int((which[:used] == lazy[0]).sum())
            rate = max(len(hit) / m, 1e-3)
        local["retries"] = local["rounds"] - local["accepted"]
        self._merge(local)
        return out


def build(dataset: Dataset, rng: RandomSource | None = None, **kw) -> ExpectedSampler:
    return ExpectedSampler(dataset, rng, **kw)


def sample(s: ExpectedSampler, h: HalfspaceQuery, k: int, rng: RandomSource) -> np.ndarray:
    return s.sample(h, k, rng)


def query_stats(s: ExpectedSampler) -> dict:
    return s.query_stats()
