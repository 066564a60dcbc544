import numpy as np
import pytest
from scipy import stats as sps

from wirs.errors import BadInput, DegenerateBins
from wirs.stats import chi2_sf, chi_squared_gof, exponent_fit, tv_distance


def test_perfect_match():
    r = chi_squared_gof([25, 25, 25, 25], [0.25] * 4)
    assert r.statistic == 0 and r.p_value == 1.0 and r.tv_distance == 0


def test_wrong_bin():
    assert chi_squared_gof([1000, 0, 0, 0], [0, 1 / 3, 1 / 3, 1 / 3]).p_value == 0.0
    assert chi_squared_gof([1000, 0, 0], [0.01, 0.495, 0.495]).p_value < 1e-100


def test_fair_draws_median_p():
    ps = []
    for seed in range(100):
        g = np.random.default_rng(seed)
        ps.append(chi_squared_gof(np.bincount(g.integers(0, 4, 10_000), minlength=4), [0.25] * 4).p_value)
    assert 0.2 <= np.median(ps) <= 0.8


def test_pooling_and_degenerate():
    r = chi_squared_gof([90, 5, 3, 2], [0.9, 0.05, 0.03, 0.02])
    assert r.dof == 2  # the two smallest bins pool into one
    with pytest.raises(DegenerateBins):
        chi_squared_gof([3, 1], [0.5, 0.5])


@pytest.mark.parametrize("dof", [1, 2, 5, 19, 100])
@pytest.mark.parametrize("stat", [0.01, 0.5, 3.0, 20.0, 150.0])
def test_chi2_sf_reference(dof, stat):
    assert chi2_sf(stat, dof) == pytest.approx(sps.chi2.sf(stat, dof), abs=1e-6)


def test_tv_properties():
    p, q = np.array([0.2, 0.8, 0]), np.array([0.5, 0.25, 0.25])
    assert tv_distance(p, q) == tv_distance(q, p)
    assert 0 <= tv_distance(p, q) <= 1
    assert tv_distance(p, p) == 0


def test_exponent_fit():
    x = np.array([2.0, 4, 8, 16, 32])
    assert exponent_fit(x, x**2)[0] == pytest.approx(2.0, abs=1e-9)
    assert exponent_fit(x, np.full(5, 3.0))[0] == pytest.approx(0.0, abs=1e-12)
    g = np.random.default_rng(1)
    xs = np.geomspace(10, 10_000, 12)
    slope, _ = exponent_fit(xs, xs ** (2 / 3) * (1 + 0.05 * g.standard_normal(12)))
    assert 0.6 <= slope <= 0.75
    with pytest.raises(BadInput):
        exponent_fit([1, 2], [1, 2])
    with pytest.raises(BadInput):
        exponent_fit([1, 2, -3], [1, 2, 3])
