"""Weighted range sampling over an array.

A complete binary tree is laid over the weights (padded to a power of two
with weightless phantom leaves).  Every node keeps an alias table over the
real leaves below it, so a node's subtree is sampled with one alias draw and
an interval is sampled by decomposing it into O(log n) canonical nodes and
putting a small alias table over their totals.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .core import AliasTable, RandomSource, alias_build, alias_sample, check_weights
from .errors import BadInterval, EmptyInput


class CanonicalTree:
    """Heap-indexed tree: node 1 is the root, children of u are 2u and 2u+1,
    leaf i is node ``size + i``."""

    def __init__(self, weights: Sequence[float]):
        w = np.asarray(weights, dtype=np.float64).ravel()
        if len(w) == 0:
            raise EmptyInput("weights must be non-empty")
        check_weights(w)
        self.n = n = len(w)
        self.weights = w
        size = 1
        while size < n:
            size *= 2
        self.size = size
        self.total = [0.0] * (2 * size)
        self.lo = [0] * (2 * size)
        self.hi = [0] * (2 * size)
        self.alias: list[AliasTable | None] = [None] * (2 * size)
        for i in range(size):
            u = size + i
            self.lo[u], self.hi[u] = i, i
            if i < n:
                self.total[u] = float(w[i])
        for u in range(size - 1, 0, -1):
            self.lo[u] = self.lo[2 * u]
            self.hi[u] = self.hi[2 * u + 1]
            self.total[u] = self.total[2 * u] + self.total[2 * u + 1]
        for u in range(1, 2 * size):
            a, b = self.lo[u], min(self.hi[u], n - 1)
            if a <= b:
                self.alias[u] = alias_build(w[a : b + 1])

    @property
    def root(self) -> int:
        return 1

    def leaf_range(self, u: int) -> tuple[int, int]:
        """Real leaves under ``u`` as an inclusive range (phantoms clipped)."""
        return self.lo[u], min(self.hi[u], self.n - 1)

    def alias_entries(self) -> int:
        return sum(t.n for t in self.alias if t is not None)


def build(weights: Sequence[float]) -> CanonicalTree:
    return CanonicalTree(weights)


def decompose(tree: CanonicalTree, a: int, b: int) -> list[int]:
    """Canonical nodes whose leaf ranges exactly tile [a, b], left to right."""
    if not (0 <= a <= b < tree.n):
        raise BadInterval(f"bad interval [{a}, {b}] for n={tree.n}")
    left, right = [], []
    lo, hi = a + tree.size, b + tree.size + 1
    while lo < hi:
        if lo & 1:
            left.append(lo)
            lo += 1
        if hi & 1:
            hi -= 1
            right.append(hi)
        lo >>= 1
        hi >>= 1
    return left + right[::-1]


def subtree_sample(tree: CanonicalTree, u: int, rng: RandomSource) -> int:
    table = tree.alias[u]
    return tree.lo[u] + alias_sample(table, rng)


def sample_interval(tree: CanonicalTree, a: int, b: int, k: int, rng: RandomSource) -> list[int]:
    """k independent leaves from [a, b], each drawn with probability w_i / w([a, b])."""
    nodes = decompose(tree, a, b)
    if len(nodes) == 1:
        u = nodes[0]
        return [subtree_sample(tree, u, rng) for _ in range(k)]
    top = alias_build([tree.total[u] for u in nodes])
    out = []
    for _ in range(k):
        u = nodes[alias_sample(top, rng)]
        out.append(subtree_sample(tree, u, rng))
    return out


def interval_total(tree: CanonicalTree, a: int, b: int) -> float:
    return math.fsum(tree.total[u] for u in decompose(tree, a, b))
