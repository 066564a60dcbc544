"""(eps, gamma)-approximate weighted halfspace sampling in worst-case time.

Each conflict list of the level hierarchies is cut into ~r = ceil(c_r/eps^3)
kd cells.  A query keeps one random representative per cell that is not
outside h.  Cells whose box lies inside h feed the inside pool and the rest
the straddling pool; both pools are alias tables over cell weights.  A draw
flips a coin weighted by the pool totals and visits the straddling pool at
most once before falling back to the inside pool, so every draw costs O(1).
Classes lighter than the heaviest class meeting h by a factor n/gamma are
ignored.
"""

from __future__ import annotations

import math
import threading
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .core import AliasTable, Dataset, RandomSource, alias_build
from .errors import BadInput, EmptyInput, EmptyRange, LevelOverflow, NoCandidates, NotFound
from .geom3d import GroupMaxIndex, HalfspaceQuery, Orientation, dual_planes, dualize_query
from .shallow_cutting import K_MIN, Hierarchy
from .weight_partition import build_half_classes, cutoff_index

C_R = 8
OP_CONSTANT = 64

OUTSIDE, INSIDE, STRADDLING = 0, 1, 2


class KdPartition:
    """Cells of a point set from median splits that cycle through the axes.

    Cell j holds ``order[offsets[j]:offsets[j+1]]``; its alias table lives in
    the same slice of ``prob`` / ``alias`` (entries are cell-local indices).
    """

    def __init__(self, pos: np.ndarray, weights: np.ndarray, ids: np.ndarray, r: int):
        ids = np.asarray(ids, dtype=np.int64)
        m = len(ids)
        if m == 0:
            raise EmptyInput("cannot partition an empty point set")
        if r < 1:
            raise BadInput("r must be at least 1")
        self.r = r
        cap = 1 if m <= r else 2 * math.ceil(m / r)
        stack = [(ids, 0)]
        cells = []
        while stack:
            cur, axis = stack.pop()
            if len(cur) <= cap:
                cells.append(cur)
                continue
            half = len(cur) // 2
            part = np.argpartition(pos[cur, axis], half)
            nxt = (axis + 1) % 3
            stack.append((cur[part[half:]], nxt))
            stack.append((cur[part[:half]], nxt))
        self.order = np.concatenate(cells)
        sizes = np.array([len(c) for c in cells])
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.sizes = sizes
        p = pos[self.order]
        self.lo = np.minimum.reduceat(p, self.offsets[:-1], axis=0)
        self.hi = np.maximum.reduceat(p, self.offsets[:-1], axis=0)
        w = weights[self.order]
        self.W = np.array([math.fsum(w[a:b].tolist()) for a, b in zip(self.offsets[:-1], self.offsets[1:])])
        prob = np.empty(m)
        alias = np.empty(m, dtype=np.int64)
        for j, (a, b) in enumerate(zip(self.offsets[:-1], self.offsets[1:])):
            t = alias_build(w[a:b])
            prob[a:b] = t.prob
            alias[a:b] = t.alias
        self.prob = prob
        self.alias = alias
        self._prob_list = prob.tolist()
        self._alias_list = alias.tolist()
        self._order_list = self.order.tolist()
        self._off_list = self.offsets.tolist()
        self._size_list = sizes.tolist()

    @property
    def cell_count(self) -> int:
        return len(self.sizes)

    def cell_ids(self, j: int) -> np.ndarray:
        return self.order[self.offsets[j] : self.offsets[j + 1]]

    def classify(self, h: HalfspaceQuery) -> np.ndarray:
        """OUTSIDE / INSIDE / STRADDLING per cell from the exact range of
        f = z - (a x + b y + c) over each box; touching the boundary straddles."""
        a, b, c = h.plane.a, h.plane.b, h.plane.c
        ax = np.where(a > 0, a * self.hi[:, 0], a * self.lo[:, 0])
        ax_min = np.where(a > 0, a * self.lo[:, 0], a * self.hi[:, 0])
        by = np.where(b > 0, b * self.hi[:, 1], b * self.lo[:, 1])
        by_min = np.where(b > 0, b * self.lo[:, 1], b * self.hi[:, 1])
        fmin = self.lo[:, 2] - ax - by - c
        fmax = self.hi[:, 2] - ax_min - by_min - c
        out = np.full(len(self.sizes), STRADDLING, dtype=np.int8)
        if h.orientation is Orientation.BELOW:
            out[fmax < 0] = INSIDE
            out[fmin > 0] = OUTSIDE
        else:
            out[fmin > 0] = INSIDE
            out[fmax < 0] = OUTSIDE
        return out

    def draw(self, cells: np.ndarray, rng: RandomSource) -> np.ndarray:
        """One weighted representative per listed cell (vectorized)."""
        m = len(cells)
        u = rng.draw_units(2 * m)
        size = self.sizes[cells]
        j = np.minimum((u[:m] * size).astype(np.int64), size - 1)
        slot = self.offsets[cells] + j
        local = np.where(u[m:] < self.prob[slot], j, self.alias[slot])
        return self.order[self.offsets[cells] + local]

    def draw_one(self, cell: int, rng: RandomSource) -> int:
        size = self._size_list[cell]
        j = int(rng.draw_unit() * size)
        if j == size:
            j -= 1
        off = self._off_list[cell]
        if rng.draw_unit() >= self._prob_list[off + j]:
            j = self._alias_list[off + j]
        return self._order_list[off + j]


def build_partition(pos, weights, ids, r: int) -> KdPartition:
    return KdPartition(np.asarray(pos, dtype=np.float64), np.asarray(weights, dtype=np.float64), ids, r)


@dataclass
class ActiveCell:
    partition: KdPartition
    cell: int
    kind: int
    cls: int

    @property
    def weight(self) -> float:
        return float(self.partition.W[self.cell])

    @property
    def ids(self) -> np.ndarray:
        return self.partition.cell_ids(self.cell)


@dataclass
class QuerySetup:
    """Deterministic part of a query: active classes and classified cells."""

    query: HalfspaceQuery
    first_class: int
    cutoff: int
    cells: list
    ops: Counter = field(default_factory=Counter)


@dataclass
class CandidateSet:
    cells: list
    reps: list
    inside_pool: list
    straddling_pool: list
    inside_alias: AliasTable | None
    straddling_alias: AliasTable | None
    W_in: float
    W_str: float
    ops: Counter = field(default_factory=Counter)

    @property
    def pi_in(self) -> float:
        return self.W_in / (self.W_in + self.W_str)


class ApproxSampler:
    def __init__(self, dataset: Dataset, eps: float, gamma: float, rng: RandomSource | None = None, *,
                 c_r: float = C_R, r: int | None = None, k_min: int = K_MIN):
        if not (0 < gamma < eps < 1):
            raise BadInput("need 0 < gamma < eps < 1")
        rng = rng or RandomSource(0)
        self.dataset = dataset
        self.n = n = dataset.n
        self.eps, self.gamma = float(eps), float(gamma)
        self.r = int(r) if r is not None else math.ceil(c_r / eps**3)
        self.cutoff_ratio = n / gamma
        self.partition = build_half_classes(dataset)
        self.group_index = GroupMaxIndex(dataset.pos, self.partition.classes)
        pos, w = dataset.pos, dataset.weights
        self.hier = []
        self.cells = []  # cells[l][mirrored] = (per-level list of per-triangle partitions, full partition)
        for li, ids in enumerate(self.partition.classes):
            per_h, per_c = {}, {}
            for mirrored in (False, True):
                hier = Hierarchy(dual_planes(pos[ids], mirrored), w[ids], rng.spawn(2 * li + mirrored),
                                 k_min=k_min, with_alias=False)
                per_h[mirrored] = hier
                levels = [
                    [KdPartition(pos, w, ids[c], self.r) if len(c) else None for c in lev.conflicts]
                    for lev in hier.levels
                ]
                per_c[mirrored] = (levels, KdPartition(pos, w, ids, self.r))
            self.hier.append(per_h)
            self.cells.append(per_c)
        self._lock = threading.Lock()
        self.reset_stats()

    def reset_stats(self) -> None:
        self._stats = Counter()
        self.max_ops = 0
        self.max_ratio = 0.0

    def query_stats(self) -> dict:
        s = dict(self._stats)
        s["max_ops"] = self.max_ops
        s["max_ratio"] = self.max_ratio
        return s

    def op_bound(self, k: int) -> float:
        """log2(n/gamma) * (log2 n + 1/eps^3) + k, the shape of the worst-case bound."""
        n = max(self.n, 2)
        return math.log2(n / self.gamma) * (math.log2(n) + 1 / self.eps**3) + k

    # -- setup -------------------------------------------------------------
    def setup(self, h: HalfspaceQuery) -> QuerySetup:
        ops = Counter()
        before = self.group_index.calls
        try:
            i = self.group_index.first_nonempty(h)
        except NotFound:
            raise EmptyRange("halfspace contains no point") from None
        finally:
            ops["envelope"] += self.group_index.calls - before
        i2 = cutoff_index(self.partition, i, self.cutoff_ratio)
        ops["cutoff"] += i2 - i + 1
        q, mirrored = dualize_query(h)
        cells = []
        for li in range(i, i2):
            hier = self.hier[li][mirrored]
            levels, full = self.cells[li][mirrored]
            ops["level"] += max(1, math.ceil(math.log2(len(hier.levels) + 1))) + 1
            try:
                lev, tri = hier.query(q)
                part = levels[lev][tri]
            except LevelOverflow:
                part = full
                ops["overflow"] += 1
            if part is None:
                continue
            kinds = part.classify(h)
            ops["cells"] += part.cell_count
            for j in np.flatnonzero(kinds != OUTSIDE).tolist():
                cells.append(ActiveCell(part, j, int(kinds[j]), li))
        return QuerySetup(h, i, i2, cells, ops)

    def generate_candidates(self, setup: QuerySetup, rng: RandomSource) -> CandidateSet:
        ops = Counter(setup.ops)
        reps = [0] * len(setup.cells)
        by_part: dict[int, list] = {}
        for idx, c in enumerate(setup.cells):
            by_part.setdefault(id(c.partition), []).append(idx)
        for idxs in by_part.values():
            part = setup.cells[idxs[0]].partition
            drawn = part.draw(np.array([setup.cells[x].cell for x in idxs]), rng)
            for x, p in zip(idxs, drawn.tolist()):
                reps[x] = p
        ops["reps"] += len(reps)
        inside = [x for x, c in enumerate(setup.cells) if c.kind == INSIDE]
        strad = [x for x, c in enumerate(setup.cells) if c.kind == STRADDLING]
        w_in = [setup.cells[x].weight for x in inside]
        w_st = [setup.cells[x].weight for x in strad]
        ops["pool"] += len(inside) + len(strad)
        return CandidateSet(
            setup.cells, reps, inside, strad,
            alias_build(w_in) if inside else None,
            alias_build(w_st) if strad else None,
            math.fsum(w_in), math.fsum(w_st), ops,
        )

    # -- selection -----------------------------------------------------------
    def _replace(self, cs: CandidateSet, x: int, rng: RandomSource) -> None:
        c = cs.cells[x]
        cs.reps[x] = c.partition.draw_one(c.cell, rng)
        cs.ops["replace"] += 1

    def select_one(self, cs: CandidateSet, h: HalfspaceQuery, rng: RandomSource) -> int:
        if cs.inside_alias is None and cs.straddling_alias is None:
            raise NoCandidates("no inside or straddling cells")
        ops = cs.ops
        pos = self.dataset.pos
        if cs.straddling_alias is not None:
            ops["coin"] += 1
            if cs.inside_alias is None or rng.draw_unit() >= cs.pi_in:
                ops["alias"] += 1
                x = cs.straddling_pool[cs.straddling_alias.sample(rng)]
                p = cs.reps[x]
                ops["test"] += 1
                self._replace(cs, x, rng)
                if h.contains_point(pos[p]):
                    return p
                if cs.inside_alias is None:
                    return self._straddling_only(cs, h, rng)
        ops["alias"] += 1
        x = cs.inside_pool[cs.inside_alias.sample(rng)]
        p = cs.reps[x]
        self._replace(cs, x, rng)
        return p

    def _straddling_only(self, cs: CandidateSet, h: HalfspaceQuery, rng: RandomSource) -> int:
        """No inside cell: keep trying the straddling pool, then scan."""
        pos = self.dataset.pos
        with self._lock:
            self._stats["straddling_retry"] += 1
        for _ in range(len(cs.straddling_pool)):
            cs.ops["alias"] += 1
            x = cs.straddling_pool[cs.straddling_alias.sample(rng)]
            p = cs.reps[x]
            cs.ops["test"] += 1
            self._replace(cs, x, rng)
            if h.contains_point(pos[p]):
                return p
        with self._lock:
            self._stats["fallback_scan"] += 1
        ids = np.concatenate([cs.cells[x].ids for x in cs.straddling_pool])
        cs.ops["scan"] += len(ids)
        ids = ids[h.contains(pos[ids])]
        w = self.dataset.weights[ids]
        return int(ids[alias_build(w).sample(rng)])

    def sample_k(self, h: HalfspaceQuery, k: int, rng: RandomSource) -> tuple[np.ndarray, int]:
        """k draws and the operation count spent on them."""
        setup = self.setup(h)
        cs = self.generate_candidates(setup, rng)
        out = np.empty(k, dtype=np.int64)
        for s in range(k):
            out[s] = self.select_one(cs, h, rng)
        total = sum(cs.ops.values())
        ratio = total / self.op_bound(k)
        with self._lock:
            self._stats["queries"] += 1
            self._stats["draws"] += k
            self._stats.update({f"ops_{key}": v for key, v in cs.ops.items()})
            self.max_ops = max(self.max_ops, total)
            self.max_ratio = max(self.max_ratio, ratio)
        return out, total


def build(dataset: Dataset, eps: float, gamma: float, rng: RandomSource | None = None, **kw) -> ApproxSampler:
    return ApproxSampler(dataset, eps, gamma, rng, **kw)


def generate_candidates(s: ApproxSampler, h: HalfspaceQuery, rng: RandomSource) -> CandidateSet:
    return s.generate_candidates(s.setup(h), rng)


def select_one(s: ApproxSampler, cs: CandidateSet, h: HalfspaceQuery, rng: RandomSource) -> int:
    return s.select_one(cs, h, rng)


def sample_k(s: ApproxSampler, h: HalfspaceQuery, k: int, rng: RandomSource) -> np.ndarray:
    return s.sample_k(h, k, rng)[0]
