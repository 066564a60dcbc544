"""Ground truth: brute-force ranges, exact distributions, a range-sum sampler,
exact enumeration of the approximate sampler's selection rule, and the
sampling-to-range-max reduction."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, RandomSource
from .errors import BadInput, EmptyRange, TooLarge
from .geom3d import HalfspaceQuery

# -- direct evaluation --------------------------------------------------------


def brute_force_range(dataset: Dataset, h: HalfspaceQuery):
    """(ids, weights, w(h)) by a linear scan."""
    ids = np.flatnonzero(h.contains(dataset.pos))
    w = dataset.weights[ids]
    return ids, w, math.fsum(w.tolist())


def exact_distribution(dataset: Dataset, h: HalfspaceQuery):
    """(ids, probabilities) of proportional sampling from h."""
    ids, w, total = brute_force_range(dataset, h)
    if len(ids) == 0:
        raise EmptyRange("halfspace contains no point")
    return ids, w / total


def argmax_in_range(dataset: Dataset, h: HalfspaceQuery) -> int:
    """Heaviest point in h; ties go to the smallest id."""
    ids, w, _ = brute_force_range(dataset, h)
    if len(ids) == 0:
        raise EmptyRange("halfspace contains no point")
    return int(ids[np.argmax(w)])


def near_boundary(dataset: Dataset, h: HalfspaceQuery, tol: float = 1e-9) -> bool:
    """Some point lies within ``tol`` (vertically) of h's plane."""
    return bool(np.any(np.abs(h.signed(dataset.pos)) <= tol))


# -- range-sum sampler --------------------------------------------------------


class RangeSumTree:
    """Balanced halving of the point ids; a node's weight inside h is a sum
    over its leaves, recomputed per query by a linear scan."""

    def __init__(self, dataset: Dataset):
        self.dataset = dataset
        n = dataset.n
        size = 1
        while size < n:
            size *= 2
        self.size = size
        self.depth = size.bit_length() - 1  # = ceil(log2 n)

    def node_sums(self, h: HalfspaceQuery) -> np.ndarray:
        leaf = np.zeros(self.size)
        inside = h.contains(self.dataset.pos)
        leaf[: self.dataset.n] = np.where(inside, self.dataset.weights, 0.0)
        sums = np.zeros(2 * self.size)
        sums[self.size :] = leaf
        lo = self.size
        while lo > 1:
            sums[lo // 2 : lo] = sums[lo : 2 * lo : 2] + sums[lo + 1 : 2 * lo : 2]
            lo //= 2
        return sums

    def sample(self, h: HalfspaceQuery, k: int, rng: RandomSource) -> np.ndarray:
        """Each draw walks from the root, entering the left child with
        probability w(left ∩ h) / w(node ∩ h)."""
        sums = self.node_sums(h)
        if sums[1] <= 0:
            raise EmptyRange("halfspace contains no point")
        u = np.ones(k, dtype=np.int64)
        for _ in range(self.depth):
            left = 2 * u
            coin = rng.draw_units(k)
            u = np.where(coin * sums[u] < sums[left], left, left + 1)
        return u - self.size


def range_sum_sampler(tree: RangeSumTree, h: HalfspaceQuery, k: int, rng: RandomSource) -> np.ndarray:
    return tree.sample(h, k, rng)


# -- exact enumeration of the one-shot selection rule -------------------------


@dataclass
class Enumeration:
    ids: np.ndarray  # points of h
    target: np.ndarray  # w / w(h)
    rho_prime: np.ndarray  # one-shot rule
    rho: np.ndarray  # rejection rule (retry the straddling pool until a hit)
    rep_checks: list = field(default_factory=list)  # (kind, rho_s, rho'_s) per assignment and rep
    outcomes: int = 0
    total_probability: float = 0.0
    w_in: float = 0.0
    w_str: float = 0.0

    def heavy(self, gamma: float, n: int) -> np.ndarray:
        return self.target >= gamma / n

    def ignored_mass(self, gamma: float, n: int) -> float:
        return float(self.target[~self.heavy(gamma, n)].sum())


def _cell_probs(part, cell):
    """Exact per-point draw probabilities implied by a cell's alias table."""
    a, b = part.offsets[cell], part.offsets[cell + 1]
    m = b - a
    prob, alias = part.prob[a:b], part.alias[a:b]
    p = prob / m + np.bincount(alias, weights=(1 - prob) / m, minlength=m)
    return part.order[a:b], p


def enumerate_selection_probs(sampler, h: HalfspaceQuery, max_outcomes: int = 10**6) -> Enumeration:
    """Exact selection probabilities of one draw under the one-shot rule and
    under the rejection rule, summed over every assignment of straddling
    representatives (weighted by their alias probabilities) and both coin
    branches.  An inside representative's identity only scales its own
    point's probability, so inside cells are folded in by linearity.
    """
    ds = sampler.dataset
    setup = sampler.setup(h)
    inside = [c for c in setup.cells if c.kind == 1]
    strad = [c for c in setup.cells if c.kind == 2]
    if not inside:
        raise BadInput("enumeration needs at least one inside cell")
    outcomes = 2 * math.prod(int(c.partition.sizes[c.cell]) for c in strad) if strad else 1
    if outcomes > max_outcomes:
        raise TooLarge(f"{outcomes} outcomes exceed {max_outcomes}")
    ids, w, wh = brute_force_range(ds, h)
    pos_of = {int(p): j for j, p in enumerate(ids)}
    rho_p = np.zeros(len(ids))
    rho = np.zeros(len(ids))
    W_in = math.fsum(c.weight for c in inside)
    W_str = math.fsum(c.weight for c in strad)
    a = W_in / (W_in + W_str)
    in_cells = [_cell_probs(c.partition, c.cell) for c in inside]
    st_cells = [_cell_probs(c.partition, c.cell) for c in strad]
    checks = []
    for combo in itertools.product(*[range(len(pts)) for pts, _ in st_cells]):
        pa = 1.0
        reps = []
        for (pts, pr), j in zip(st_cells, combo):
            pa *= pr[j]
            reps.append(int(pts[j]))
        hit = [int(p) in pos_of for p in reps]
        P = math.fsum(c.weight for c, hh in zip(strad, hit) if hh) / W_str if strad else 0.0
        denom = a + (1 - a) * P
        for c, (pts, pr) in zip(inside, in_cells):
            share = c.weight / W_in
            one = share * (1 - (1 - a) * P)
            rej = share * a / denom
            checks.append(("inside", rej, one))
            for p, q in zip(pts.tolist(), pr.tolist()):
                rho_p[pos_of[p]] += pa * q * one
                rho[pos_of[p]] += pa * q * rej
        for c, p, hh in zip(strad, reps, hit):
            if not hh:
                continue
            one = (1 - a) * c.weight / W_str
            rej = one / denom
            checks.append(("straddling", rej, one))
            rho_p[pos_of[p]] += pa * one
            rho[pos_of[p]] += pa * rej
    return Enumeration(ids, w / wh, rho_p, rho, checks, outcomes, float(rho_p.sum()), W_in, W_str)


# -- sampling to range-max ------------------------------------------------------


def reweight_by_rank(dataset: Dataset, c: float = 3.0) -> Dataset:
    """Weights n^(c * rank) with ranks centred on zero so they stay finite.

    rank orders points by (weight, -id) ascending, so the heaviest point,
    smallest id first among ties, gets the largest new weight."""
    n = dataset.n
    if n == 1:
        return dataset.reweighted([1.0])
    span = c * math.log(n) * (n - 1) / 2
    if span > 700:
        raise TooLarge(f"n^{c}-ratio weights for n={n} overflow double precision")
    order = np.lexsort((-np.arange(n), dataset.weights))
    rank = np.empty(n)
    rank[order] = np.arange(n)
    return dataset.reweighted(np.exp(c * math.log(n) * (rank - (n - 1) / 2)))


def range_max_via_sampling(sampler, h: HalfspaceQuery, rng: RandomSource) -> int:
    """One draw from a sampler built on rank-reweighted data."""
    return int(sampler.sample(h, 1, rng)[0])


def check_enumeration(e: Enumeration, eps: float, gamma: float, n: int, tol: float = 1e-12) -> dict:
    """Violations of the (1 ± eps) band, the one-sided cap on light points, the
    ignored-mass budget and the per-representative distortion bounds."""
    heavy = e.heavy(gamma, n)
    ratio = e.rho_prime / e.target
    band = int(np.sum(heavy & ((ratio < 1 - eps - tol) | (ratio > 1 + eps + tol))))
    cap = int(np.sum(~heavy & (ratio > 1 + eps + tol)))
    reps = 0
    for kind, rho, rp in e.rep_checks:
        if kind == "inside":
            ok = rho * (1 - tol) <= rp <= (1 + eps) * rho * (1 + tol)
        else:
            ok = (1 - eps) * rho * (1 - tol) <= rp <= rho * (1 + tol)
        reps += not ok
    return {
        "band_violations": band,
        "cap_violations": cap,
        "ignored_mass": e.ignored_mass(gamma, n),
        "ignored_ok": e.ignored_mass(gamma, n) <= gamma,
        "rep_violations": reps,
        "total_probability": e.total_probability,
    }


def tiny_cases(count: int, eps: float, gamma: float, seed: int = 0, r: int = 4, max_tries: int = 100_000,
               straddling_share: float = 0.5):
    """Enumerable instances (6 <= n <= 12, two weight scales) paired with a query
    that has an inside cell and straddling weight at most eps/2 of the pools.
    At least ``straddling_share`` of the cases have a nonempty straddling pool."""
    from .approx_sampler import ApproxSampler
    from .workload import random_halfspace

    g = np.random.default_rng(seed)
    out = []
    for _ in range(max_tries):
        if len(out) >= count:
            break
        n = int(g.integers(6, 13))
        pos = g.random((n, 3))
        w = np.where(g.random(n) < 0.5, g.uniform(1, 2, n), g.uniform(8, 16, n))
        ds = Dataset(pos, w)
        h = random_halfspace(g, np.zeros(3), np.ones(3))
        if near_boundary(ds, h) or not h.contains(pos).any():
            continue
        s = ApproxSampler(ds, eps, gamma, RandomSource(int(g.integers(1 << 31))), r=r)
        try:
            e = enumerate_selection_probs(s, h)
        except (BadInput, TooLarge):
            continue
        if e.w_str > eps / 2 * (e.w_in + e.w_str):
            continue
        plain = sum(1 for *_, f in out if f.w_str == 0)
        if e.w_str == 0 and plain + 1 > (1 - straddling_share) * count:
            continue
        out.append((s, h, e))
    return out
