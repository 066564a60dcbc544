import math

import numpy as np
import pytest

from wirs.core import RandomSource
from wirs.errors import BadInterval, EmptyInput, NonPositiveWeight
from wirs.interval_sampler import build, decompose, interval_total, sample_interval, subtree_sample
from wirs.stats import binomial_band, chi_squared_gof, tv_distance


def test_build_small():
    t = build([1.0])
    assert t.total[t.root] == 1.0
    assert build([1, 2, 3, 4]).total[1] == 10


def test_build_errors():
    with pytest.raises(EmptyInput):
        build([])
    with pytest.raises(NonPositiveWeight):
        build([1, 0])


def test_totals_and_space():
    g = np.random.default_rng(1)
    w = g.random(1000) + 0.01
    t = build(w)
    for u in range(1, t.size):
        s = t.total[2 * u] + t.total[2 * u + 1]
        assert abs(t.total[u] - s) <= 1e-12 * max(s, 1e-300)
        a, b = t.leaf_range(u)
        if a <= b:
            assert abs(t.total[u] - math.fsum(w[a : b + 1].tolist())) <= 1e-12 * t.total[u]
    assert t.alias_entries() <= 1000 * (math.ceil(math.log2(1000)) + 1)


def test_decompose_trivial():
    t = build(np.ones(37))
    n = 37
    nodes = decompose(t, 0, n - 1)
    assert sum(t.leaf_range(u)[1] - t.leaf_range(u)[0] + 1 for u in nodes) == n
    t2 = build(np.ones(64))
    assert decompose(t2, 0, 63) == [1]
    assert decompose(t2, 5, 5) == [64 + 5]


def test_decompose_coverage():
    t = build(np.ones(1024))
    g = np.random.default_rng(2)
    for _ in range(2000):
        a, b = sorted(g.integers(0, 1024, 2))
        nodes = decompose(t, a, b)
        assert len(nodes) <= 20
        covered = []
        for u in nodes:
            lo, hi = t.leaf_range(u)
            covered.extend(range(lo, hi + 1))
        assert covered == list(range(a, b + 1))


@pytest.mark.parametrize("a,b", [(-1, 3), (3, 2), (0, 10)])
def test_decompose_bad(a, b):
    with pytest.raises(BadInterval):
        decompose(build(np.ones(10)), a, b)


def test_sample_single_leaf(rs):
    t = build([1, 2, 3])
    assert sample_interval(t, 1, 1, 50, rs) == [1] * 50


def test_sample_two_leaves(rs):
    t = build([1, 3])
    m = 100_000
    f = sample_interval(t, 0, 1, m, rs).count(1) / m
    lo, hi = binomial_band(0.75, m)
    assert lo <= f <= hi


def test_sample_random_interval_chi2(rs):
    g = np.random.default_rng(5)
    w = g.random(256) + 0.05
    t = build(w)
    a, b = 37, 201
    m = 100_000
    counts = np.bincount(np.array(sample_interval(t, a, b, m, rs)) - a, minlength=b - a + 1)
    assert chi_squared_gof(counts, w[a : b + 1]).p_value > 1e-3


def test_subtree_sample(rs):
    g = np.random.default_rng(6)
    w = g.random(64) + 0.05
    t = build(w)
    u = 5  # leaves 16..31 when size=64
    lo, hi = t.leaf_range(u)
    before = rs.draws
    draws = [subtree_sample(t, u, rs) for _ in range(50_000)]
    assert rs.draws - before == 2 * 50_000
    counts = np.bincount(np.array(draws) - lo, minlength=hi - lo + 1)
    assert chi_squared_gof(counts, w[lo : hi + 1]).p_value > 1e-3
    eq = build(np.ones(8))
    f = np.bincount([subtree_sample(eq, 1, rs) for _ in range(80_000)], minlength=8) / 80_000
    blo, bhi = binomial_band(1 / 8, 80_000)
    assert np.all((f >= blo) & (f <= bhi))


def test_distributional_tv_small():
    w = np.array([1, 2, 3, 5, 8, 13, 21, 34, 1, 1, 2, 7], dtype=float)
    t = build(w)
    rng = RandomSource(9)
    m = 1_000_000
    for a, b in [(0, 11), (3, 9)]:
        got = np.bincount(np.array(sample_interval(t, a, b, m, rng)) - a, minlength=b - a + 1) / m
        exact = w[a : b + 1] / w[a : b + 1].sum()
        assert tv_distance(got, exact) <= 0.005


def test_per_draw_units(rs):
    t = build(np.arange(1, 101, dtype=float))
    before = rs.draws
    sample_interval(t, 3, 90, 1000, rs)
    assert (rs.draws - before) / 1000 <= 4


def test_interval_total():
    w = np.arange(1, 11, dtype=float)
    assert interval_total(build(w), 2, 5) == 3 + 4 + 5 + 6
