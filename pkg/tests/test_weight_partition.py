import math

import numpy as np
import pytest

from wirs.core import Dataset
from wirs.errors import BadInput
from wirs.weight_partition import RatioKind, build_coarse_groups, build_half_classes, cutoff_index


def ds_from(weights):
    w = np.asarray(weights, dtype=float)
    return Dataset(np.zeros((len(w), 3)), w)


def class_weights(ds, part):
    return [sorted(ds.weights[c].tolist(), reverse=True) for c in part.classes]


def test_half_classes_example():
    ds = ds_from([8, 5, 4, 3, 1])
    assert class_weights(ds, build_half_classes(ds)) == [[8, 5, 4], [3], [1]]


def test_half_classes_equal_weights():
    ds = ds_from([2.0] * 7)
    p = build_half_classes(ds)
    assert p.t == 1 and p.classes[0].tolist() == list(range(7))


def test_half_classes_inclusive_threshold():
    ds = ds_from([1, 0.5, 0.25, 0.125])
    assert class_weights(ds, build_half_classes(ds)) == [[1, 0.5], [0.25, 0.125]]


def test_coarse_examples():
    assert build_coarse_groups(ds_from([1, 1, 1, 1]), 16).t == 1
    assert build_coarse_groups(ds_from([1e6, 1]), 100).t == 2
    with pytest.raises(BadInput):
        build_coarse_groups(ds_from([1, 2]), 1.0)


def check_partition(ds, part, lo_ratio, hi_ratio):
    ids = np.concatenate(part.classes)
    assert sorted(ids.tolist()) == list(range(ds.n))
    w = ds.weights
    for i, c in enumerate(part.classes):
        r = w[c].max() / w[c].min()
        assert r <= hi_ratio
        if i + 1 < part.t:
            assert w[c].min() > w[part.classes[i + 1]].max()
    for i in range(part.t):
        s = part.suffix_total[i + 1] + part.class_total[i]
        assert abs(part.suffix_total[i] - s) <= 1e-12 * part.suffix_total[i]
    assert abs(part.suffix_total[0] - ds.total_weight) <= 1e-12 * ds.total_weight


@pytest.mark.parametrize("seed", range(8))
def test_half_classes_properties(seed):
    g = np.random.default_rng(seed)
    n = int(g.integers(1, 10_001))
    w = np.exp(g.uniform(0, 25, n))
    w[: n // 10] = w[0]  # ties
    ds = ds_from(w)
    p = build_half_classes(ds)
    assert p.ratio_kind is RatioKind.HALF_CLASSES
    check_partition(ds, p, 0.5, 2.0)
    for i in range(p.t - 1):
        assert p.class_max[i + 1] <= p.class_max[i] / 2
    for i in range(p.t):
        assert cutoff_index(p, i, n**2) - i <= 2 * math.log2(max(n, 2)) + 2


@pytest.mark.parametrize("seed", range(5))
def test_coarse_group_bound(seed):
    g = np.random.default_rng(100 + seed)
    n = int(g.integers(2, 5000))
    w = np.exp(g.uniform(0, 3 * math.log(n) * 3, n))
    ds = ds_from(w)
    R = float(n) ** 2
    p = build_coarse_groups(ds, R)
    check_partition(ds, p, 1 / R, R)
    U = w.max() / w.min()
    assert p.t <= min(n, math.ceil(math.log(U) / math.log(R)) + 1)


def test_cutoff_examples():
    single = build_half_classes(ds_from([3.0, 3.0]))
    assert cutoff_index(single, 0, 100.0) == single.t
    w = [2.0**-j for j in range(21)]
    p = build_half_classes(ds_from(w))
    i_prime = cutoff_index(p, 0, 2.0**10)
    scan = next(j for j in range(p.t) if p.class_max[j] < p.class_min[0] / 2**10)
    assert i_prime == scan
    assert p.class_max[i_prime] < 2.0**-10
    q = build_half_classes(ds_from([100, 10, 1, 0.1]))
    for i in range(q.t - 1):
        assert cutoff_index(q, i, 1.0) == i + 1


def test_members_from_and_class_of():
    ds = ds_from([8, 5, 4, 3, 1])
    p = build_half_classes(ds)
    assert sorted(p.members_from(1).tolist()) == [3, 4]
    assert p.members_from(p.t).size == 0
    assert p.class_of().tolist() == [0, 0, 0, 1, 2]
