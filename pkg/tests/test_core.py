import math

import numpy as np
import pytest

from wirs.core import AliasTable, Dataset, RandomSource, WeightedPoint, alias_build, alias_sample
from wirs.errors import EmptyInput, NonPositiveWeight
from wirs.stats import binomial_band, chi_squared_gof


def draw_counts(table, rng, m):
    return np.bincount([alias_sample(table, rng) for _ in range(m)], minlength=table.n)


@pytest.mark.parametrize(
    "weights, expect",
    [([1, 1, 1, 1], [0.25] * 4), ([3, 1], [0.75, 0.25]), ([5, 3, 2], [0.5, 0.3, 0.2])],
)
def test_alias_reconstruction_small(weights, expect):
    t = alias_build(weights)
    np.testing.assert_allclose(t.probabilities(), expect, rtol=1e-12)
    assert t.total == sum(weights)


def test_alias_532_chi_squared(rs):
    t = alias_build([5, 3, 2])
    counts = draw_counts(t, rs, 100_000)
    assert chi_squared_gof(counts, [0.5, 0.3, 0.2]).p_value > 1e-3


def test_alias_single_element(rs):
    t = alias_build([1.0])
    assert all(alias_sample(t, rs) == 0 for _ in range(100))


def test_alias_tiny_second_weight(rs):
    w = [1.0, 1e-4]
    t = alias_build(w)
    m = 100_000
    c0 = draw_counts(t, rs, m)[0] / m
    lo, hi = binomial_band(1 / 1.0001, m)
    assert lo <= c0 <= hi


def test_alias_symmetric(rs):
    t = alias_build([2, 2, 2])
    m = 100_000
    freq = draw_counts(t, rs, m) / m
    lo, hi = binomial_band(1 / 3, m)
    assert np.all((freq >= lo) & (freq <= hi))


@pytest.mark.parametrize("bad", [[1.0, 0.0], [1.0, -2.0], [math.inf], [math.nan, 1.0]])
def test_alias_rejects_bad_weights(bad):
    with pytest.raises(NonPositiveWeight):
        alias_build(bad)


def test_alias_rejects_empty():
    with pytest.raises(EmptyInput):
        alias_build([])


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("kind", ["uniform", "loguniform", "heavy"])
def test_alias_reconstruction_identity(seed, kind):
    g = np.random.default_rng(seed)
    n = int(g.integers(1, 10_001))
    if kind == "uniform":
        w = g.random(n) + 1e-3
    elif kind == "loguniform":
        w = np.exp(g.uniform(0, 30, n))
    else:
        w = np.ones(n)
        w[0] = 1e9
    t = alias_build(w)
    expect = w / math.fsum(w.tolist())
    np.testing.assert_allclose(t.probabilities(), expect, rtol=1e-12)
    assert np.all((t.prob >= 0) & (t.prob <= 1))
    assert np.all((t.alias >= 0) & (t.alias < n))


def test_alias_deterministic_sequence():
    t = alias_build([0.3, 1.7, 2.0, 0.01])
    a, b = RandomSource(7), RandomSource(7)
    assert [alias_sample(t, a) for _ in range(500)] == [alias_sample(t, b) for _ in range(500)]
    assert alias_build([0.3, 1.7, 2.0, 0.01]).alias.tolist() == t.alias.tolist()


def test_alias_draw_count_contract(rs):
    t = alias_build(np.arange(1, 50))
    before = rs.draws
    for _ in range(100):
        alias_sample(t, rs)
    assert rs.draws - before == 200


def test_sample_many_matches_distribution(rs):
    t = alias_build([1, 2, 3, 4])
    counts = np.bincount(t.sample_many(rs, 100_000), minlength=4)
    assert chi_squared_gof(counts, [0.1, 0.2, 0.3, 0.4]).p_value > 1e-3


def test_dataset_totals_and_ratio():
    g = np.random.default_rng(3)
    w = np.exp(g.uniform(0, 20, 5000))
    ds = Dataset(g.random((5000, 3)), w)
    assert abs(ds.total_weight - math.fsum(w.tolist())) <= 1e-12 * ds.total_weight
    assert ds.weight_ratio == pytest.approx(w.max() / w.min())
    assert ds.n == len(ds) == 5000


def test_dataset_round_trip_points():
    ds = Dataset([[0, 0, 0], [1, 2, 3]], [1.0, 2.5])
    again = Dataset.from_points(ds.points)
    assert np.array_equal(again.pos, ds.pos) and np.array_equal(again.weights, ds.weights)
    assert ds.points[1] == WeightedPoint(1, (1.0, 2.0, 3.0), 2.5)


def test_dataset_validation():
    with pytest.raises(EmptyInput):
        Dataset(np.empty((0, 3)), [])
    with pytest.raises(NonPositiveWeight):
        Dataset([[0, 0, 0]], [0.0])
    with pytest.raises(ValueError):
        Dataset.from_points([WeightedPoint(1, (0, 0, 0), 1.0)])


def test_random_source_spawn_and_reproducibility():
    a, b = RandomSource(11), RandomSource(11)
    assert [a.draw_unit() for _ in range(10)] == [b.draw_unit() for _ in range(10)]
    assert a.spawn(5).draw_unit() == RandomSource(11 ^ 5).draw_unit()
    u = a.draw_units(1000)
    assert np.all((u >= 0) & (u < 1))
