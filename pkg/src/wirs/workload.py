"""Synthetic datasets and queries, and their CSV formats."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset
from .errors import BadInput
from .geom3d import HalfspaceQuery, Orientation, Plane

WEIGHT_DISTS = ("uniform", "loguniform", "twoscale")
POINT_DISTS = ("cube", "sphere")


@dataclass
class WorkloadConfig:
    n: int = 1000
    weights: str = "loguniform"
    umax: float = 1e6
    points: str = "cube"
    queries: int = 100
    eps: float = 0.25
    gamma: float = 0.025
    seed: int = 0
    k: int = 10

    def __post_init__(self):
        if self.n < 1:
            raise BadInput("n must be positive")
        if self.umax < 1:
            raise BadInput("umax must be at least 1")
        if not (0 < self.gamma < self.eps < 1):
            raise BadInput("need 0 < gamma < eps < 1")
        if self.weights not in WEIGHT_DISTS or self.points not in POINT_DISTS:
            raise BadInput("unknown distribution")


def gen_weights(n: int, dist: str, umax: float, g: np.random.Generator) -> np.ndarray:
    if dist == "uniform":
        return g.uniform(1.0, umax, n) if umax > 1 else np.ones(n)
    if dist == "loguniform":
        return np.exp(g.uniform(0.0, math.log(umax), n))
    if dist == "twoscale":
        return np.where(g.random(n) < 0.5, 1.0, float(umax))
    raise BadInput(f"unknown weight distribution {dist!r}")


def gen_positions(n: int, dist: str, g: np.random.Generator) -> np.ndarray:
    if dist == "cube":
        return g.random((n, 3))
    if dist == "sphere":
        v = g.standard_normal((n, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return 0.5 + 0.5 * v
    raise BadInput(f"unknown point distribution {dist!r}")


def gen_dataset(n: int, weights: str = "loguniform", umax: float = 1e6, points: str = "cube",
                seed: int = 0) -> Dataset:
    g = np.random.default_rng(seed)
    pos = gen_positions(n, points, g)
    return Dataset(pos, gen_weights(n, weights, umax, g))


def random_halfspace(g: np.random.Generator, lo, hi, slope: float = 1.0) -> HalfspaceQuery:
    """Plane with slopes in [-slope, slope] through a uniform point of the box."""
    a, b = g.uniform(-slope, slope, 2)
    x0, y0, z0 = g.uniform(lo, hi)
    o = Orientation.BELOW if g.random() < 0.5 else Orientation.ABOVE
    return HalfspaceQuery(Plane(float(a), float(b), float(z0 - a * x0 - b * y0)), o)


def k_range_halfspace(dataset: Dataset, m: int, g: np.random.Generator, slope: float = 1.0,
                      min_gap: float = 1e-6) -> HalfspaceQuery:
    """Random slopes and orientation, offset placed between the m-th and
    (m+1)-th point so that exactly m points lie inside."""
    n = dataset.n
    if not 1 <= m <= n:
        raise BadInput(f"m={m} outside [1, {n}]")
    for _ in range(1000):
        a, b = g.uniform(-slope, slope, 2)
        s = np.sort(dataset.pos[:, 2] - a * dataset.pos[:, 0] - b * dataset.pos[:, 1])
        below = g.random() < 0.5
        # BELOW keeps the m smallest s, ABOVE the m largest
        j = m if below else n - m
        lo = s[j - 1] if j > 0 else s[0] - 1.0
        hi = s[j] if j < n else s[-1] + 1.0
        if hi - lo < min_gap:
            continue
        o = Orientation.BELOW if below else Orientation.ABOVE
        return HalfspaceQuery(Plane(float(a), float(b), float((lo + hi) / 2)), o)
    raise BadInput("could not separate m points (too many ties)")


def gen_queries(dataset: Dataset | None, count: int, mode: str = "random-halfspace", m: int = 10,
                seed: int = 0, slope: float = 1.0) -> list[HalfspaceQuery]:
    g = np.random.default_rng(seed)
    if mode == "random-halfspace":
        if dataset is None:
            lo, hi = np.zeros(3), np.ones(3)
        else:
            lo, hi = dataset.pos.min(axis=0), dataset.pos.max(axis=0)
        return [random_halfspace(g, lo, hi, slope) for _ in range(count)]
    if mode == "k-range":
        if dataset is None:
            raise BadInput("k-range queries need a dataset")
        return [k_range_halfspace(dataset, m, g, slope) for _ in range(count)]
    raise BadInput(f"unknown query mode {mode!r}")


# -- CSV ----------------------------------------------------------------------


def _f(x: float) -> str:
    return "%.17g" % x


def write_points(path, dataset: Dataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x", "y", "z", "w"])
        for i in range(dataset.n):
            x, y, z = dataset.pos[i]
            w.writerow([i, _f(x), _f(y), _f(z), _f(dataset.weights[i])])


def read_points(path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    rows.sort(key=lambda r: int(r["id"]))
    if [int(r["id"]) for r in rows] != list(range(len(rows))):
        raise BadInput("point ids must be dense in [0, n)")
    pos = [[float(r["x"]), float(r["y"]), float(r["z"])] for r in rows]
    return Dataset(pos, [float(r["w"]) for r in rows])


def write_queries(path, queries: list[HalfspaceQuery]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["qid", "a", "b", "c", "d", "orient"])
        for qid, h in enumerate(queries):
            w.writerow([qid, _f(h.plane.a), _f(h.plane.b), _f(h.plane.c), 0, h.orientation.value])


def read_queries(path) -> list[tuple[int, HalfspaceQuery]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        h = HalfspaceQuery.from_coefficients(float(r["a"]), float(r["b"]), float(r["c"]), r["orient"])
        out.append((int(r["qid"]), h))
    out.sort(key=lambda t: t[0])
    return out
