"""Weight classes: factor-2 classes and coarse bounded-ratio groups."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset
from .errors import BadInput, EmptyInput


class RatioKind(enum.Enum):
    HALF_CLASSES = "half"
    COARSE_GROUPS = "coarse"


@dataclass(frozen=True)
class WeightClassPartition:
    """Classes of point ids ordered by descending weight.

    ``suffix_total[i]`` is the weight of classes ``i, i+1, ...``; it carries
    one extra trailing zero so ``suffix_total[t] == 0``.
    """

    classes: list[np.ndarray]
    class_total: list[float]
    suffix_total: list[float]
    class_max: np.ndarray
    class_min: np.ndarray
    ratio_kind: RatioKind
    ratio: float

    @property
    def t(self) -> int:
        return len(self.classes)

    def class_of(self) -> np.ndarray:
        n = sum(len(c) for c in self.classes)
        out = np.empty(n, dtype=np.int64)
        for i, c in enumerate(self.classes):
            out[c] = i
        return out

    def members_from(self, i: int) -> np.ndarray:
        """Ids of every point in classes ``>= i``."""
        if i >= self.t:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(self.classes[i:])


def _sorted_order(dataset: Dataset) -> np.ndarray:
    # weight descending, id ascending
    ids = np.arange(dataset.n)
    return np.lexsort((ids, -dataset.weights))


def _finish(dataset, groups, kind, ratio) -> WeightClassPartition:
    w = dataset.weights
    totals = [math.fsum(w[g].tolist()) for g in groups]
    suffix = [0.0] * (len(groups) + 1)
    for i in range(len(groups) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + totals[i]
    return WeightClassPartition(
        classes=groups,
        class_total=totals,
        suffix_total=suffix,
        class_max=np.array([w[g].max() for g in groups]),
        class_min=np.array([w[g].min() for g in groups]),
        ratio_kind=kind,
        ratio=ratio,
    )


def build_half_classes(dataset: Dataset) -> WeightClassPartition:
    """Greedy factor-2 classes: take the heaviest remaining weight w* and
    everything with weight >= w*/2, then recurse."""
    if dataset.n == 0:
        raise EmptyInput("empty dataset")
    order = _sorted_order(dataset)
    ws = dataset.weights[order]
    groups = []
    start = 0
    n = len(order)
    while start < n:
        # ws is non-increasing; first index whose weight drops below w*/2
        stop = start + int(np.searchsorted(-ws[start:], -ws[start] / 2.0, side="right"))
        groups.append(order[start:stop])
        start = stop
    return _finish(dataset, groups, RatioKind.HALF_CLASSES, 2.0)


def build_coarse_groups(dataset: Dataset, ratio: float) -> WeightClassPartition:
    """Fewest weight-ordered groups whose intra-group ratio is at most ``ratio``.

    Greedy from the heaviest weight; equal weights never straddle a group
    boundary, so every point of group i outweighs every point of group i+1.
    """
    if dataset.n == 0:
        raise EmptyInput("empty dataset")
    if not ratio > 1:
        raise BadInput("ratio must exceed 1")
    order = _sorted_order(dataset)
    ws = dataset.weights[order]
    groups = []
    start = 0
    n = len(order)
    while start < n:
        stop = start + int(np.searchsorted(-ws[start:], -ws[start] / ratio, side="right"))
        groups.append(order[start:stop])
        start = stop
    return _finish(dataset, groups, RatioKind.COARSE_GROUPS, float(ratio))


def cutoff_index(partition: WeightClassPartition, start: int, threshold: float) -> int:
    """Smallest i' >= start whose max weight is below min(class start)/threshold.

    Returns ``partition.t`` when no such class exists.
    """
    limit = partition.class_min[start] / threshold
    for j in range(start, partition.t):
        if partition.class_max[j] < limit:
            return j
    return partition.t
