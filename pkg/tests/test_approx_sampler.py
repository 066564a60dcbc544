import math

import numpy as np
import pytest

from wirs.approx_sampler import INSIDE, OUTSIDE, STRADDLING, ApproxSampler, KdPartition, build_partition, generate_candidates, sample_k, select_one
from wirs.core import Dataset, RandomSource
from wirs.errors import BadInput, EmptyInput, EmptyRange
from wirs.geom3d import HalfspaceQuery
from wirs.oracle import brute_force_range, near_boundary
from wirs.stats import chi_squared_gof, exponent_fit
from wirs.workload import gen_dataset, gen_queries, random_halfspace


def test_partition_trivial():
    corners = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], float)
    p = build_partition(corners, np.ones(8), np.arange(8), 8)
    assert p.cell_count == 8 and sorted(p.order.tolist()) == list(range(8))
    one = build_partition(corners, np.ones(8), np.arange(8), 1)
    assert one.cell_count == 1
    with pytest.raises(EmptyInput):
        build_partition(corners, np.ones(8), np.array([], dtype=int), 4)


def test_partition_invariants():
    g = np.random.default_rng(1)
    pos = g.random((5000, 3))
    w = g.random(5000) + 0.1
    ids = g.choice(5000, 3000, replace=False)
    p = KdPartition(pos, w, ids, 64)
    assert sorted(p.order.tolist()) == sorted(ids.tolist())
    cap = 2 * math.ceil(3000 / 64)
    assert p.sizes.max() <= cap and p.sizes.min() >= math.ceil(3000 / 64)
    for j in range(p.cell_count):
        cid = p.cell_ids(j)
        assert np.all(pos[cid] >= p.lo[j]) and np.all(pos[cid] <= p.hi[j])
        assert p.W[j] == pytest.approx(w[cid].sum(), rel=1e-12)


def test_classification_matches_points():
    g = np.random.default_rng(2)
    pos = g.random((2000, 3))
    p = KdPartition(pos, np.ones(2000), np.arange(2000), 128)
    for _ in range(200):
        h = random_halfspace(g, np.zeros(3), np.ones(3))
        kinds = p.classify(h)
        for j in range(p.cell_count):
            inside = h.contains(pos[p.cell_ids(j)])
            if kinds[j] == INSIDE:
                assert inside.all()
            elif kinds[j] == OUTSIDE:
                assert not inside.any()


def test_crossing_exponent():
    g = np.random.default_rng(3)
    pos = g.random((10_000, 3))
    hs = [random_halfspace(g, np.zeros(3), np.ones(3)) for _ in range(500)]
    rs = [64, 512, 4096]
    counts = []
    for r in rs:
        p = KdPartition(pos, np.ones(10_000), np.arange(10_000), r)
        counts.append(np.mean([(p.classify(h) == STRADDLING).sum() for h in hs]))
    slope, _ = exponent_fit(rs, counts)
    assert slope <= 0.75
    # straddling cells stay within c * r^(2/3 + 1/12)
    for r, c in zip(rs, counts):
        assert c <= 4 * r ** (2 / 3 + 1 / 12)


def test_rep_draws_exact_on_tiny_cells():
    pos = np.array([[0.1, 0.1, 0.1], [0.2, 0.1, 0.1], [0.3, 0.1, 0.1], [0.9, 0.9, 0.9], [0.8, 0.9, 0.9]])
    w = np.array([1.0, 2.0, 5.0, 3.0, 1.0])
    p = KdPartition(pos, w, np.arange(5), 2)
    for j in range(p.cell_count):
        a, b = p.offsets[j], p.offsets[j + 1]
        m = b - a
        probs = p.prob[a:b] / m + np.bincount(p.alias[a:b], weights=(1 - p.prob[a:b]) / m, minlength=m)
        np.testing.assert_allclose(probs, w[p.cell_ids(j)] / w[p.cell_ids(j)].sum(), rtol=1e-12)


def test_parameter_validation():
    ds = gen_dataset(50, seed=1)
    with pytest.raises(BadInput):
        ApproxSampler(ds, 0.1, 0.2)
    assert ApproxSampler(ds, 0.5, 0.05).r == 64


def test_all_inside_is_exact():
    ds = gen_dataset(300, "uniform", 2.0, seed=5)
    s = ApproxSampler(ds, 0.5, 0.05, RandomSource(1))
    h = HalfspaceQuery.from_coefficients(0, 0, 5.0)  # everything
    cs = generate_candidates(s, h, RandomSource(2))
    assert cs.straddling_pool == [] and cs.W_str == 0
    d = sample_k(s, h, 100_000, RandomSource(3))
    counts = np.bincount(d, minlength=300)
    assert chi_squared_gof(counts, ds.weights).p_value > 1e-3


def test_empty_and_single():
    ds = gen_dataset(100, seed=6)
    s = ApproxSampler(ds, 0.5, 0.05)
    with pytest.raises(EmptyRange):
        sample_k(s, HalfspaceQuery.from_coefficients(0, 0, -5.0), 3, RandomSource(0))
    one = Dataset([[0.5, 0.5, 0.5]], [2.0])
    s1 = ApproxSampler(one, 0.5, 0.05)
    h = HalfspaceQuery.from_coefficients(0, 0, 1.0)
    cs = generate_candidates(s1, h, RandomSource(0))
    assert [select_one(s1, cs, h, RandomSource(i)) for i in range(5)] == [0] * 5


@pytest.fixture(scope="module")
def mid():
    ds = gen_dataset(4000, "loguniform", 1e6, seed=7)
    return ds, ApproxSampler(ds, 0.25, 0.01, RandomSource(8))


def test_op_counts_and_replacements(mid):
    ds, s = mid
    g = np.random.default_rng(9)
    s.reset_stats()
    for j, h in enumerate(gen_queries(ds, 100, seed=10)):
        if not h.contains(ds.pos).any():
            continue
        _, ops = s.sample_k(h, 200, RandomSource(j))
        assert ops <= 64 * s.op_bound(200)
    st = s.query_stats()
    assert st["ops_replace"] <= 2 * st["draws"]
    assert st.get("fallback_scan", 0) == 0


def test_heavy_point_band(mid):
    ds, s = mid
    checked = 0
    for j, h in enumerate(gen_queries(ds, 500, seed=11)):
        ids, w, wh = brute_force_range(ds, h)
        if len(ids) == 0 or near_boundary(ds, h):
            continue
        t = w / wh
        heavy = t >= 0.05
        if not heavy.any():
            continue
        n_draws = 20_000
        d = sample_k(s, h, n_draws, RandomSource(100 + j))
        assert np.isin(d, ids).all()
        f = np.array([(d == i).mean() for i in ids[heavy]])
        tt = t[heavy]
        sig = np.sqrt(tt * (1 - tt) / n_draws)
        assert np.all(f >= 0.75 * tt - 4 * sig) and np.all(f <= 1.25 * tt + 4 * sig)
        checked += 1
    assert checked >= 20
