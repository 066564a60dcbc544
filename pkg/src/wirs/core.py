"""Domain types, the randomness contract and Walker's alias table."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInput, NonPositiveWeight


@dataclass(frozen=True)
class WeightedPoint:
    id: int
    pos: tuple[float, float, float]
    weight: float


class Dataset:
    """A dense, id-ordered collection of weighted 3D points.

    Coordinates live in an ``(n, 3)`` float64 array and weights in an
    ``(n,)`` array; point ``i`` has id ``i``.
    """

    def __init__(self, pos, weights):
        pos = np.ascontiguousarray(pos, dtype=np.float64).reshape(-1, 3)
        weights = np.ascontiguousarray(weights, dtype=np.float64).ravel()
        if len(weights) == 0:
            raise EmptyInput("dataset must contain at least one point")
        if len(pos) != len(weights):
            raise ValueError("pos and weights differ in length")
        check_weights(weights)
        if not np.all(np.isfinite(pos)):
            raise ValueError("coordinates must be finite")
        self.pos = pos
        self.weights = weights
        self.total_weight = math.fsum(weights.tolist())

    @classmethod
    def from_points(cls, points: Iterable[WeightedPoint]) -> "Dataset":
        pts = sorted(points, key=lambda p: p.id)
        if [p.id for p in pts] != list(range(len(pts))):
            raise ValueError("point ids must be dense in [0, n)")
        return cls([p.pos for p in pts], [p.weight for p in pts])

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def points(self) -> list[WeightedPoint]:
        return [
            WeightedPoint(i, tuple(map(float, self.pos[i])), float(self.weights[i]))
            for i in range(self.n)
        ]

    @property
    def weight_ratio(self) -> float:
        """U = max weight / min weight."""
        return float(self.weights.max() / self.weights.min())

    def reweighted(self, weights) -> "Dataset":
        return Dataset(self.pos, weights)

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, total_weight={self.total_weight:.6g})"


def check_weights(weights: np.ndarray) -> None:
    if len(weights) == 0:
        raise EmptyInput("weights must be non-empty")
    bad = ~np.isfinite(weights) | (weights <= 0)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise NonPositiveWeight(f"weight[{j}] = {weights[j]!r} is not a positive finite number")


class RandomSource:
    """Seedable stream of uniform reals in [0, 1).

    Backed by numpy's PCG64.  ``draws`` counts every unit consumed, which is
    how tests assert per-operation randomness budgets.
    """

    def __init__(self, seed: int | None = 0):
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))
        self.draws = 0

    def draw_unit(self) -> float:
        self.draws += 1
        return float(self._gen.random())

    def draw_units(self, m: int) -> np.ndarray:
        self.draws += m
        return self._gen.random(m)

    def spawn(self, key: int) -> "RandomSource":
        """Independent child stream, deterministic in (seed, key)."""
        base = 0 if self.seed is None else self.seed
        return RandomSource(int(base) ^ int(key))

    @property
    def generator(self) -> np.random.Generator:
        """Direct access for bulk data generation (not counted)."""
        return self._gen


@dataclass(frozen=True)
class AliasTable:
    n: int
    prob: np.ndarray
    alias: np.ndarray
    total: float
    _prob_list: list = field(repr=False, compare=False, default=None)
    _alias_list: list = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self._prob_list is None:
            object.__setattr__(self, "_prob_list", self.prob.tolist())
            object.__setattr__(self, "_alias_list", self.alias.tolist())

    def sample(self, rng: RandomSource) -> int:
        return alias_sample(self, rng)

    def sample_many(self, rng: RandomSource, m: int) -> np.ndarray:
        u = rng.draw_units(2 * m)
        j = np.minimum((u[:m] * self.n).astype(np.int64), self.n - 1)
        return np.where(u[m:] < self.prob[j], j, self.alias[j])

    def probabilities(self) -> np.ndarray:
        """Exact draw distribution implied by (prob, alias)."""
        p = self.prob / self.n
        p = p + np.bincount(self.alias, weights=(1.0 - self.prob) / self.n, minlength=self.n)
        return p


def alias_build(weights: Sequence[float]) -> AliasTable:
    """Two-worklist (Vose) alias construction.

    Cells whose scaled probability is exactly 1 go to the large list, so the
    table is a deterministic function of the input order.
    """
    w = np.asarray(weights, dtype=np.float64).ravel()
    check_weights(w)
    n = len(w)
    total = math.fsum(w.tolist())
    scaled = (w * n) / total
    # rounding of ``total`` shifts every cell the same way; hand the exact
    # deficit back proportionally so the leftover cell does not absorb it
    deficit = -math.fsum(scaled.tolist() + [-float(n)])
    scaled = (scaled + scaled * (deficit / n)).tolist()
    prob = [1.0] * n
    alias = list(range(n))
    comp = [0.0] * n
    small = [i for i, q in enumerate(scaled) if q < 1.0]
    large = [i for i, q in enumerate(scaled) if q >= 1.0]
    while small and large:
        s = small.pop()
        g = large[-1]
        prob[s] = scaled[s]
        alias[s] = g
        # residual of g minus the exact float mass handed to s, via TwoSum
        a = scaled[g]
        b = -(1.0 - scaled[s])
        t = a + b
        bb = t - a
        comp[g] += (a - (t - bb)) + (b - bb)
        scaled[g] = t
        if t + comp[g] < 1.0:
            scaled[g] = t + comp[g]
            large.pop()
            small.append(g)
    for g in large:
        prob[g] = 1.0
    # leftovers are 1 up to rounding
    return AliasTable(
        n,
        np.array(prob, dtype=np.float64),
        np.array(alias, dtype=np.int64),
        total,
        prob,
        alias,
    )


def alias_sample(table: AliasTable, rng: RandomSource) -> int:
    """One draw; consumes exactly two units (cell pick, then coin)."""
    j = int(rng.draw_unit() * table.n)
    if j == table.n:
        j -= 1
    coin = rng.draw_unit()
    return j if coin < table._prob_list[j] else table._alias_list[j]
