"""Approximate k-levels of a plane arrangement and their conflict lists.

A level for ``k`` is a triangulated concave surface over the square domain
``[-B, B]^2``.  Its vertices sit exactly on the (lift * k)-level: a vertex at
(x, y) has height equal to the (lift*k + 1)-th smallest plane value there, so
exactly lift * k planes (ignoring ties) pass strictly below it.  The surface
is the upper convex hull of the vertices; it is refined until, at every probe
(centroid, edge midpoints and three interior points per triangle), at least
``theta * k`` planes pass below it.

A triangle's conflict list is the union of its vertices' conflict lists.  If
a query point q lies on or below the triangle over q's projection, any plane
passing below q passes below one of the three vertices, so the list is a
superset of the planes below q.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .core import AliasTable, RandomSource, alias_build
from .errors import ConstructionFailed, EmptyInput, LevelOverflow
from .geom3d import EnvelopeIndex

C_SIZE = 8
C_CONF = 8
C_Q = 32
K_MIN = 32
THETA = 0.5
LIFT = 2  # vertex level / k; 3 * LIFT <= C_CONF
_CHUNK = 1 << 22  # plane-value matrix entries evaluated per block


def _values(planes: np.ndarray, xy: np.ndarray) -> np.ndarray:
    return xy[:, :1] * planes[:, 0] + xy[:, 1:2] * planes[:, 1] + planes[:, 2]


def _kth_heights(planes: np.ndarray, xy: np.ndarray, k: int) -> np.ndarray:
    """(k+1)-th smallest plane value at each location."""
    out = np.empty(len(xy))
    step = max(1, _CHUNK // len(planes))
    for s in range(0, len(xy), step):
        v = _values(planes, xy[s : s + step])
        out[s : s + step] = np.partition(v, k, axis=1)[:, k]
    return out


def _levels_at(planes: np.ndarray, xyz: np.ndarray) -> np.ndarray:
    """Number of planes strictly below each point."""
    out = np.empty(len(xyz), dtype=np.int64)
    step = max(1, _CHUNK // len(planes))
    for s in range(0, len(xyz), step):
        v = _values(planes, xyz[s : s + step, :2])
        out[s : s + step] = (v < xyz[s : s + step, 2:3]).sum(axis=1)
    return out


def _below_lists(planes: np.ndarray, xyz: np.ndarray) -> list[np.ndarray]:
    out = []
    step = max(1, _CHUNK // len(planes))
    for s in range(0, len(xyz), step):
        v = _values(planes, xyz[s : s + step, :2])
        mask = v < xyz[s : s + step, 2:3]
        out.extend(np.flatnonzero(row) for row in mask)
    return out


@dataclass
class ApproxLevel:
    """One triangulated surface.  ``tri`` indexes into ``vertices``; each
    triangle has a supporting plane ``tri_planes[j] = (a, b, c)``."""

    k: int
    extent: float
    vertices: np.ndarray
    tri: np.ndarray
    tri_planes: np.ndarray
    neighbors: np.ndarray
    vertex_conflicts: list
    conflicts: list
    refinements: int = 0
    attempts: int = 1
    conflict_total: list = field(default_factory=list)
    alias: list = field(default_factory=list)
    _env: EnvelopeIndex | None = field(default=None, repr=False)

    def __post_init__(self):
        self._env = EnvelopeIndex(self.tri_planes)
        v = self.vertices
        p0 = v[self.tri[:, 0], :2]
        self._p0 = p0
        self._e1 = v[self.tri[:, 1], :2] - p0
        self._e2 = v[self.tri[:, 2], :2] - p0
        self._det = self._e1[:, 0] * self._e2[:, 1] - self._e1[:, 1] * self._e2[:, 0]

    @property
    def triangle_count(self) -> int:
        return len(self.tri)

    def max_conflict(self) -> int:
        return max((len(c) for c in self.conflicts), default=0)

    def conflict_entries(self) -> int:
        return sum(len(c) for c in self.conflicts)

    def in_domain(self, x: float, y: float) -> bool:
        return abs(x) <= self.extent and abs(y) <= self.extent

    def height(self, x: float, y: float) -> float:
        return self._env.value(x, y)

    def _contains(self, j: int, x: float, y: float, tol: float = 1e-12) -> bool:
        d = self._det[j]
        dx, dy = x - self._p0[j, 0], y - self._p0[j, 1]
        e1, e2 = self._e1[j], self._e2[j]
        s = (dx * e2[1] - dy * e2[0]) / d
        t = (e1[0] * dy - e1[1] * dx) / d
        return s >= -tol and t >= -tol and s + t <= 1 + tol

    def locate(self, x: float, y: float) -> int:
        """Triangle whose projection contains (x, y)."""
        j = self._env.locate(x, y)
        if self._contains(j, x, y):
            return j
        # coplanar facets share a supporting plane; walk to the right one
        seen = {j}
        frontier = [j]
        for _ in range(8):
            nxt = []
            for u in frontier:
                for w in self.neighbors[u]:
                    if w >= 0 and w not in seen:
                        if self._contains(w, x, y):
                            return int(w)
                        seen.add(w)
                        nxt.append(w)
            frontier = nxt
        dx, dy = x - self._p0[:, 0], y - self._p0[:, 1]
        s = (dx * self._e2[:, 1] - dy * self._e2[:, 0]) / self._det
        t = (self._e1[:, 0] * dy - self._e1[:, 1] * dx) / self._det
        ok = np.flatnonzero((s >= -1e-9) & (t >= -1e-9) & (s + t <= 1 + 1e-9))
        if len(ok) == 0:
            raise LevelOverflow("point outside the level's domain")
        return int(ok[0])

    def to_json(self) -> dict:
        sizes = [len(c) for c in self.conflicts]
        return {
            "k": self.k,
            "extent": self.extent,
            "triangles": self.triangle_count,
            "vertices": len(self.vertices),
            "refinements": self.refinements,
            "attempts": self.attempts,
            "max_conflict": max(sizes, default=0),
            "mean_conflict": float(np.mean(sizes)) if sizes else 0.0,
            "conflict_sizes": sizes,
            "triangle_vertices": self.vertices[self.tri].tolist(),
        }


def domain_extent(planes: np.ndarray) -> float:
    span = planes.max(axis=0) - planes.min(axis=0)
    return max(4.0 * float(np.linalg.norm(span)), 1.0)


def _upper_surface(pts: np.ndarray):
    """Upper-hull triangles of the lifted vertices, or None if qhull fails."""
    try:
        hull = ConvexHull(pts)
    except (QhullError, ValueError):
        return None
    eq = hull.equations
    up = eq[:, 2] > 1e-12 * np.linalg.norm(eq[:, :3], axis=1)
    idx = np.flatnonzero(up)
    remap = -np.ones(len(eq), dtype=np.int64)
    remap[idx] = np.arange(len(idx))
    nb = remap[hull.neighbors[idx]]
    return hull.simplices[idx], eq[idx], nb


def _flat_surface(pts: np.ndarray):
    """Fallback when the lifted vertices are coplanar: two triangles over the box
    corners (which are always the first four vertices)."""
    tri = np.array([[0, 1, 2], [0, 2, 3]])
    sol, *_ = np.linalg.lstsq(np.c_[pts[:, :2], np.ones(len(pts))], pts[:, 2], rcond=None)
    fit = pts[:, :2] @ sol[:2] + sol[2]
    if np.abs(fit - pts[:, 2]).max() > 1e-9 * (1 + np.abs(pts[:, 2]).max()):
        return None
    eq = np.array([[-sol[0], -sol[1], 1.0, -sol[2]]] * 2)
    return tri, eq, np.array([[1, -1, -1], [0, -1, -1]])


def _surface(pts: np.ndarray):
    s = _upper_surface(pts)
    if s is None or len(s[0]) == 0:
        s = _flat_surface(pts)
    if s is None:
        raise ConstructionFailed("could not triangulate level surface")
    simplices, eq, nb = s
    # z = -(n_x x + n_y y + d) / n_z
    planes = np.stack([-eq[:, 0] / eq[:, 2], -eq[:, 1] / eq[:, 2], -eq[:, 3] / eq[:, 2]], axis=1)
    return simplices, planes, nb


def build_level(
    planes,
    k: int,
    rng: RandomSource | None = None,
    *,
    extent: float | None = None,
    c_size: int = C_SIZE,
    c_conf: int = C_CONF,
    theta: float = THETA,
    lift: float = LIFT,
    retries: int = 10,
    max_rounds: int = 30,
) -> ApproxLevel:
    planes = np.asarray(planes, dtype=np.float64).reshape(-1, 3)
    n = len(planes)
    if n == 0:
        raise EmptyInput("no planes")
    if not 1 <= k <= n // 2:
        raise ValueError(f"k={k} outside [1, n/2] for n={n}")
    rng = rng or RandomSource(0)
    gen = rng.generator
    B = domain_extent(planes) if extent is None else float(extent)
    max_tri = c_size * n / k
    kv = min(int(round(lift * k)), n - 1)
    corners = np.array([[-B, -B], [B, -B], [B, B], [-B, B]])
    for attempt in range(1, retries + 1):
        g = max(2, math.ceil(math.sqrt(n / k)))
        # the initial grid (~2(g-1)^2 faces) takes at most a quarter of the budget
        while g > 2 and 2 * g * g > max_tri / 4:
            g -= 1
        ticks = np.linspace(-B, B, g)
        gx, gy = np.meshgrid(ticks, ticks)
        xy = np.c_[gx.ravel(), gy.ravel()]
        interior = (np.abs(xy[:, 0]) < B) & (np.abs(xy[:, 1]) < B)
        xy = xy[interior]
        xy = xy + gen.uniform(-0.25, 0.25, xy.shape) * (2 * B / max(g - 1, 1))
        xy = np.vstack([corners, xy])
        pts = np.c_[xy, _kth_heights(planes, xy, kv)]
        refinements = 0
        while True:
            simplices, tri_planes, nb = _surface(pts)
            tv = pts[simplices]  # (T, 3, 3)
            probes = np.concatenate([tv.mean(axis=1)] + [
                (tv[:, i] + tv[:, j]) / 2 for i, j in ((0, 1), (1, 2), (0, 2))
            ] + [
                (4 * tv[:, i] + tv[:, (i + 1) % 3] + tv[:, (i + 2) % 3]) / 6 for i in range(3)
            ])
            lv = _levels_at(planes, probes)
            bad = np.flatnonzero(lv < theta * k)
            if len(bad) == 0:
                break
            # deepest dips first, so a tight budget goes where it matters
            cand = probes[bad[np.argsort(lv[bad], kind="stable")], :2]
            _, first = np.unique(cand, axis=0, return_index=True)
            new_xy = cand[np.sort(first)]
            # a triangulation of V points has at most 2V - 5 faces
            room = int((max_tri + 5) // 2) - len(pts)
            if room <= 0 or refinements >= max_rounds:
                break
            new_xy = new_xy[:room]
            pts = np.vstack([pts, np.c_[new_xy, _kth_heights(planes, new_xy, kv)]])
            refinements += 1
        vconf = _below_lists(planes, pts)
        conflicts = []
        for a, b, c in simplices:
            conflicts.append(np.union1d(np.union1d(vconf[a], vconf[b]), vconf[c]))
        level = ApproxLevel(k, B, pts, simplices, tri_planes, nb, vconf, conflicts, refinements, attempt)
        if level.triangle_count <= max_tri and level.max_conflict() <= c_conf * k:
            return level
    raise ConstructionFailed(f"level k={k} violated size bounds after {retries} attempts")


class Hierarchy:
    """Levels ``k = k_min * 2^j`` up to n/2, plus per-triangle weight totals and
    alias tables.  ``full`` holds every plane and serves queries above the top
    level (or all queries when n < 2*k_min)."""

    def __init__(self, planes, weights, rng=None, *, k_min=K_MIN, extent=None,
                 c_size=C_SIZE, c_conf=C_CONF, c_q=C_Q, with_alias=True):
        planes = np.asarray(planes, dtype=np.float64).reshape(-1, 3)
        weights = np.asarray(weights, dtype=np.float64).ravel()
        if len(planes) == 0:
            raise EmptyInput("no planes")
        self.planes = planes
        self.weights = weights
        self.n = n = len(planes)
        self.k_min = k_min
        self.c_q = c_q
        self.extent = domain_extent(planes) if extent is None else float(extent)
        rng = rng or RandomSource(0)
        self.levels: list[ApproxLevel] = []
        k = k_min
        while k <= n // 2:
            self.levels.append(
                build_level(planes, k, rng.spawn(k), extent=self.extent, c_size=c_size, c_conf=c_conf)
            )
            k *= 2
        self.full_ids = np.arange(n)
        self.full_total = math.fsum(weights.tolist())
        self.full_alias = alias_build(weights) if with_alias else None
        if with_alias:
            for lev in self.levels:
                lev.conflict_total = [math.fsum(weights[c].tolist()) for c in lev.conflicts]
                lev.alias = [alias_build(weights[c]) if len(c) else None for c in lev.conflicts]

    def conflict_entries(self) -> int:
        return sum(lev.conflict_entries() for lev in self.levels)

    def alias_entries(self) -> int:
        return sum(t.n for lev in self.levels for t in lev.alias if t is not None) + (
            self.full_alias.n if self.full_alias is not None else 0
        )

    def below_level(self, i: int, q) -> bool:
        """q lies on or below level i's surface."""
        return float(q[2]) <= self.levels[i].height(float(q[0]), float(q[1]))

    def query(self, q) -> tuple[int, int]:
        """Lowest level whose surface is on or above q, and the triangle there."""
        x, y = float(q[0]), float(q[1])
        m = len(self.levels)
        if m == 0 or abs(x) > self.extent or abs(y) > self.extent:
            raise LevelOverflow("query outside the levels")
        if not self.below_level(m - 1, q):
            raise LevelOverflow("query above the top level")
        lo, hi = -1, m - 1  # q not below lo (or lo == -1), q below hi
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.below_level(mid, q):
                hi = mid
            else:
                lo = mid
        return hi, self.levels[hi].locate(x, y)

    def conflicts(self, i: int, tri: int) -> np.ndarray:
        return self.levels[i].conflicts[tri]

    def dump(self) -> str:
        return json.dumps({"n": self.n, "k_min": self.k_min, "levels": [lev.to_json() for lev in self.levels]})


def build_hierarchy(planes, weights, rng=None, **kw) -> Hierarchy:
    return Hierarchy(planes, weights, rng, **kw)


def query_level(hier: Hierarchy, q) -> tuple[int, int]:
    return hier.query(q)


def conflict_oracle(planes: np.ndarray, q) -> np.ndarray:
    """Ids of planes passing strictly below q, by direct scan."""
    v = planes[:, 0] * q[0] + planes[:, 1] * q[1] + planes[:, 2]
    return np.flatnonzero(v < q[2])
