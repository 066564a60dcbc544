"""Goodness-of-fit verdicts and small fitting helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc

from .errors import BadInput, DegenerateBins

POOL_MIN = 5.0


@dataclass(frozen=True)
class GofReport:
    statistic: float
    dof: int
    p_value: float
    tv_distance: float
    n_draws: int

    def passed(self, alpha: float) -> bool:
        return self.p_value > alpha

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "tv_distance": self.tv_distance,
            "n_draws": self.n_draws,
        }


def chi2_sf(statistic: float, dof: int) -> float:
    """Upper tail of the chi-squared distribution: Q(dof/2, statistic/2)."""
    if dof <= 0:
        raise BadInput("dof must be positive")
    if statistic <= 0:
        return 1.0
    if math.isinf(statistic):
        return 0.0
    return float(gammaincc(dof / 2.0, statistic / 2.0))


def tv_distance(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return float(0.5 * np.abs(p - q).sum())


def _pool(counts: np.ndarray, expected: np.ndarray):
    """Merge every bin with expected count below POOL_MIN into one bin; if that
    bin is still too small, fold in the smallest remaining bins."""
    small = expected < POOL_MIN
    if not small.any():
        return counts, expected
    big_idx = np.flatnonzero(~small)
    big_idx = big_idx[np.argsort(expected[big_idx], kind="stable")]
    pc, pe = counts[small].sum(), expected[small].sum()
    j = 0
    while pe < POOL_MIN and j < len(big_idx):
        pc += counts[big_idx[j]]
        pe += expected[big_idx[j]]
        j += 1
    rest = big_idx[j:]
    return np.append(counts[rest], pc), np.append(expected[rest], pe)


def chi_squared_gof(counts, expected_probs) -> GofReport:
    """Pearson test of observed ``counts`` against ``expected_probs``."""
    counts = np.asarray(counts, dtype=np.float64).ravel()
    probs = np.asarray(expected_probs, dtype=np.float64).ravel()
    if counts.shape != probs.shape:
        raise BadInput("counts and probabilities differ in length")
    total = counts.sum()
    if total <= 0:
        raise BadInput("no draws")
    probs = probs / probs.sum()
    tv = tv_distance(counts / total, probs)
    # draws landing where the model puts no mass refute it outright
    if np.any((probs == 0) & (counts > 0)):
        return GofReport(math.inf, max(len(probs) - 1, 1), 0.0, tv, int(total))
    support = probs > 0
    c, e = _pool(counts[support], probs[support] * total)
    if len(c) < 2:
        raise DegenerateBins("fewer than two bins after pooling")
    stat = float(((c - e) ** 2 / e).sum())
    dof = len(c) - 1
    return GofReport(stat, dof, chi2_sf(stat, dof), tv, int(total))


def binomial_band(p: float, n: int, sigmas: float = 4.0) -> tuple[float, float]:
    """Frequency interval p ± sigmas * sqrt(p(1-p)/n)."""
    s = sigmas * math.sqrt(max(p * (1 - p), 0.0) / n)
    return p - s, p + s


def exponent_fit(xs, ys) -> tuple[float, float]:
    """Least-squares slope of log y on log x, and the RMS residual."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if len(x) < 3 or len(x) != len(y):
        raise BadInput("need at least three (x, y) pairs")
    if np.any(x <= 0) or np.any(y <= 0):
        raise BadInput("exponent fit needs positive values")
    lx, ly = np.log(x), np.log(y)
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + icpt)) ** 2)))
    return float(slope), resid
