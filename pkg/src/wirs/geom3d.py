"""Duality, lower envelopes of planes and halfspace range-max search.

Conventions
-----------
A point ``p = (p1, p2, p3)`` dualizes to the plane ``z = p1*x + p2*y - p3``.
For the query ``z >= a*x + b*y + c`` (orientation ABOVE) the dual point is
``q = (a, b, -c)``; ``p`` lies strictly inside the open halfspace iff the dual
plane of ``p`` passes strictly below ``q``.  BELOW queries are answered on the
mirror image ``(p1, p2, -p3)`` of the data, where they become ABOVE queries
with dual point ``(-a, -b, c)``.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial import QhullError

from .errors import EmptyInput, NotFound, VerticalQuery


class Orientation(enum.Enum):
    BELOW = "below"
    ABOVE = "above"

    @classmethod
    def parse(cls, s: str) -> "Orientation":
        s = s.strip().lower()
        if s in ("below", "le", "<=", "b"):
            return cls.BELOW
        if s in ("above", "ge", ">=", "a"):
            return cls.ABOVE
        raise ValueError(f"unknown orientation {s!r}")


@dataclass(frozen=True)
class Plane:
    """The non-vertical plane z = a*x + b*y + c."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.a, self.b, self.c)):
            raise VerticalQuery("plane coefficients must be finite")

    def __call__(self, x, y):
        return self.a * x + self.b * y + self.c


@dataclass(frozen=True)
class HalfspaceQuery:
    """Closed halfspace ``z <= plane(x, y)`` (BELOW) or ``z >= plane(x, y)`` (ABOVE)."""

    plane: Plane
    orientation: Orientation = Orientation.BELOW

    @classmethod
    def from_coefficients(cls, a, b, c, orientation=Orientation.BELOW) -> "HalfspaceQuery":
        if isinstance(orientation, str):
            orientation = Orientation.parse(orientation)
        return cls(Plane(float(a), float(b), float(c)), orientation)

    @classmethod
    def from_normal(cls, normal: Sequence[float], offset: float) -> "HalfspaceQuery":
        """The halfspace ``normal . p <= offset``."""
        nx, ny, nz = map(float, normal)
        scale = max(abs(nx), abs(ny), abs(nz))
        if scale == 0 or abs(nz) <= 1e-12 * scale:
            raise VerticalQuery("halfspace boundary is vertical")
        plane = Plane(-nx / nz, -ny / nz, offset / nz)
        return cls(plane, Orientation.BELOW if nz > 0 else Orientation.ABOVE)

    def signed(self, pos) -> np.ndarray:
        """``z - plane(x, y)``; non-positive inside a BELOW query."""
        pos = np.asarray(pos, dtype=np.float64)
        return pos[..., 2] - (self.plane.a * pos[..., 0] + self.plane.b * pos[..., 1] + self.plane.c)

    def contains(self, pos) -> np.ndarray:
        s = self.signed(pos)
        return s <= 0 if self.orientation is Orientation.BELOW else s >= 0

    def contains_point(self, p) -> bool:
        s = p[2] - (self.plane.a * p[0] + self.plane.b * p[1] + self.plane.c)
        return s <= 0 if self.orientation is Orientation.BELOW else s >= 0


def dualize(p) -> Plane:
    return Plane(float(p[0]), float(p[1]), -float(p[2]))


def dual_planes(pos: np.ndarray, mirrored: bool = False) -> np.ndarray:
    """(n, 3) coefficients (a, b, c) of the dual planes of ``pos`` (or of its mirror)."""
    pos = np.asarray(pos, dtype=np.float64).reshape(-1, 3)
    out = pos.copy()
    if not mirrored:
        out[:, 2] = -out[:, 2]
    return out


def dualize_query(h: HalfspaceQuery) -> tuple[np.ndarray, bool]:
    """Dual point of ``h`` and whether it refers to the mirrored data."""
    a, b, c = h.plane.a, h.plane.b, h.plane.c
    if h.orientation is Orientation.ABOVE:
        return np.array([a, b, -c]), False
    return np.array([-a, -b, c]), True


def dual_contains(p, h: HalfspaceQuery) -> bool:
    """Containment decided in dual space with the unmirrored dual point (a, b, -c).

    BELOW: the dual plane of p passes at-or-above the dual point.
    ABOVE: it passes at-or-below.
    """
    dp = dualize(p)
    q1, q2, q3 = h.plane.a, h.plane.b, -h.plane.c
    v = dp(q1, q2)
    return v >= q3 if h.orientation is Orientation.BELOW else v <= q3


# ---------------------------------------------------------------------------
# lower envelope with slab point location


def _lower_hull_vertices(coef: np.ndarray):
    """Lower-hull facets of the dual points; None when qhull cannot cope."""
    try:
        hull = ConvexHull(coef)
    except (QhullError, ValueError):
        return None
    lower = hull.equations[:, 2] < -1e-12 * np.linalg.norm(hull.equations[:, :3], axis=1)
    return hull.simplices[lower]


def _solve_triples(coef: np.ndarray, triples: np.ndarray) -> np.ndarray:
    """x-coordinates where the three planes of each triple meet (nan if they don't)."""
    if len(triples) == 0:
        return np.empty(0)
    P = coef[triples]  # (T, 3, 3) rows (a, b, c)
    A = np.stack([P[:, 0, :2] - P[:, 1, :2], P[:, 0, :2] - P[:, 2, :2]], axis=1)
    rhs = np.stack([P[:, 1, 2] - P[:, 0, 2], P[:, 2, 2] - P[:, 0, 2]], axis=1)
    det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    scale = np.abs(A).max(axis=(1, 2)) ** 2 + 1e-300
    ok = np.abs(det) > 1e-14 * scale
    x = np.full(len(triples), np.nan)
    x[ok] = (rhs[ok, 0] * A[ok, 1, 1] - rhs[ok, 1] * A[ok, 0, 1]) / det[ok]
    return x


def _vertical_edges(coef: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """x of the crossing line for plane pairs with equal y-slope."""
    if len(pairs) == 0:
        return np.empty(0)
    P, Q = coef[pairs[:, 0]], coef[pairs[:, 1]]
    same_b = P[:, 1] == Q[:, 1]
    da = P[:, 0] - Q[:, 0]
    ok = same_b & (da != 0)
    return -(P[ok, 2] - Q[ok, 2]) / da[ok]


def _lines_lower_envelope(slope: np.ndarray, icpt: np.ndarray, ids: np.ndarray) -> list[int]:
    """Lower envelope of lines ``icpt + slope*y`` ordered by increasing y."""
    order = np.lexsort((icpt, -slope))
    seq: list[int] = []
    sl: list[float] = []
    ic: list[float] = []
    last_slope = None
    for j in order.tolist():
        s, c = float(slope[j]), float(icpt[j])
        if last_slope is not None and s == last_slope:
            continue  # same slope, larger intercept: dominated
        last_slope = s
        while len(seq) >= 2:
            # drop middle line if the new one overtakes it no later than it overtakes its predecessor
            s1, c1, s2, c2 = sl[-2], ic[-2], sl[-1], ic[-1]
            if (c - c1) * (s1 - s2) <= (c2 - c1) * (s1 - s):
                seq.pop(), sl.pop(), ic.pop()
            else:
                break
        seq.append(int(ids[j]))
        sl.append(s)
        ic.append(c)
    return seq


class EnvelopeIndex:
    """Lower envelope ``min_i (a_i x + b_i y + c_i)`` with point location.

    Envelope planes come from the lower convex hull of the dual points
    ``(a_i, b_i, c_i)``.  Point location is a slab decomposition: slab
    boundaries are the x-coordinates of envelope vertices (plus vertical
    envelope edges); inside a slab the envelope's faces have a fixed order in
    y, so a query is two binary searches.  ``linear=True`` replaces the slab
    structure by a direct minimum over the envelope planes.
    """

    SMALL = 10
    BRUTE_MAX = 48
    MAX_SLAB_PLANES = 400

    def __init__(self, planes, linear: bool = False):
        planes = np.asarray(planes, dtype=np.float64).reshape(-1, 3)
        if len(planes) == 0:
            raise EmptyInput("envelope needs at least one plane")
        self.planes = planes
        self.m = len(planes)
        # among planes with identical slopes only the lowest can appear
        order = np.lexsort((np.arange(self.m), planes[:, 2], planes[:, 1], planes[:, 0]))
        sp = planes[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = (sp[1:, 0] != sp[:-1, 0]) | (sp[1:, 1] != sp[:-1, 1])
        cand = np.sort(order[first])
        self.linear = linear
        xs = None
        if len(cand) == 1:
            env = cand
            xs = np.empty(0)
        elif len(cand) <= self.SMALL:
            env = cand
            xs = self._brute_xs(planes[cand])
        else:
            simplices = _lower_hull_vertices(planes[cand])
            if simplices is None or len(simplices) == 0:
                env = cand
                if len(cand) <= self.BRUTE_MAX:
                    xs = self._brute_xs(planes[cand])
                else:
                    self.linear = True
            else:
                local = np.unique(simplices)
                env = cand[local]
                remap = -np.ones(len(cand), dtype=np.int64)
                remap[local] = np.arange(len(local))
                tri = remap[simplices]
                ecoef = planes[env]
                vx = _solve_triples(ecoef, tri)
                pairs = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [0, 2]]])
                xs = np.concatenate([vx, _vertical_edges(ecoef, pairs)])
        self.env = np.asarray(env, dtype=np.int64)
        if len(self.env) > self.MAX_SLAB_PLANES:
            self.linear = True
        self._env_coef = planes[self.env]
        if not self.linear:
            self._build_slabs(xs)

    @staticmethod
    def _brute_xs(coef: np.ndarray) -> np.ndarray:
        m = len(coef)
        idx = np.arange(m)
        if m >= 3:
            i, j, k = np.meshgrid(idx, idx, idx, indexing="ij")
            mask = (i < j) & (j < k)
            triples = np.stack([i[mask], j[mask], k[mask]], axis=1)
        else:
            triples = np.empty((0, 3), dtype=np.int64)
        i, j = np.meshgrid(idx, idx, indexing="ij")
        mask = i < j
        pairs = np.stack([i[mask], j[mask]], axis=1)
        return np.concatenate([_solve_triples(coef, triples), _vertical_edges(coef, pairs)])

    def _build_slabs(self, xs: np.ndarray) -> None:
        xs = xs[np.isfinite(xs)]
        xs = np.unique(xs)
        self.xs = xs.tolist()
        if len(xs) == 0:
            mids = [0.0]
        else:
            mids = [xs[0] - 1.0] + ((xs[1:] + xs[:-1]) / 2).tolist() + [xs[-1] + 1.0]
        a, b, c = self._env_coef[:, 0], self._env_coef[:, 1], self._env_coef[:, 2]
        local = np.arange(len(self.env))
        self.slabs = []
        for xm in mids:
            seq = _lines_lower_envelope(b, a * xm + c, local)
            self.slabs.append(seq)
        self._a = a.tolist()
        self._b = b.tolist()
        self._c = c.tolist()

    def locate(self, x: float, y: float) -> int:
        """Index (into the input planes) of a plane attaining the envelope at (x, y)."""
        if self.linear:
            v = self._env_coef[:, 0] * x + self._env_coef[:, 1] * y + self._env_coef[:, 2]
            return int(self.env[int(np.argmin(v))])
        seq = self.slabs[bisect.bisect_right(self.xs, x)]
        a, b, c = self._a, self._b, self._c
        lo, hi = 0, len(seq) - 1
        # first j with y below the breakpoint between seq[j] and seq[j+1]
        while lo < hi:
            mid = (lo + hi) // 2
            u, v = seq[mid], seq[mid + 1]
            ybrk = ((a[v] - a[u]) * x + (c[v] - c[u])) / (b[u] - b[v])
            if y < ybrk:
                hi = mid
            else:
                lo = mid + 1
        return int(self.env[seq[lo]])

    def value(self, x: float, y: float) -> float:
        a, b, c = self.planes[self.locate(x, y)]
        return float(a * x + b * y + c)

    def facet_count(self) -> int:
        return len(self.env)

    def stored_refs(self) -> int:
        return self.m


def build_envelope(planes, linear: bool = False) -> EnvelopeIndex:
    return EnvelopeIndex(planes, linear=linear)


def envelope_below(env: EnvelopeIndex, q) -> bool:
    """True iff some plane of ``env`` passes strictly below the point ``q``."""
    return env.value(float(q[0]), float(q[1])) < float(q[2])


# ---------------------------------------------------------------------------
# smallest nonempty group (and range max)


class GroupMaxIndex:
    """Finds the first group (in the given order) that has a point in a halfspace.

    One side of the data (plain or mirrored dual planes) per orientation.  Each
    internal node of a balanced recursion over group indices stores the
    envelope of its left half; every group also has its own envelope so a
    descent that ends by going right can confirm the final group is hit.
    """

    def __init__(self, pos, groups: Sequence[np.ndarray], linear: bool = False):
        pos = np.asarray(pos, dtype=np.float64).reshape(-1, 3)
        if len(groups) == 0:
            raise EmptyInput("no groups")
        self.pos = pos
        self.groups = [np.asarray(g, dtype=np.int64) for g in groups]
        self.t = len(self.groups)
        self.linear = linear
        self.calls = 0
        self._sides = {}
        for mirrored in (False, True):
            planes = dual_planes(pos, mirrored)
            nodes = {}
            self._build(planes, 0, self.t, nodes)
            leaves = [EnvelopeIndex(planes[g], linear=linear) for g in self.groups]
            self._sides[mirrored] = (nodes, leaves)

    def _build(self, planes, lo, hi, nodes) -> None:
        if hi - lo <= 1:
            return
        mid = (lo + hi) // 2
        ids = np.concatenate(self.groups[lo:mid])
        nodes[(lo, hi)] = EnvelopeIndex(planes[ids], linear=self.linear)
        self._build(planes, lo, mid, nodes)
        self._build(planes, mid, hi, nodes)

    def stored_refs(self) -> int:
        """Plane references stored for one orientation."""
        nodes, leaves = self._sides[False]
        return sum(e.m for e in nodes.values()) + sum(e.m for e in leaves)

    def first_nonempty(self, h: HalfspaceQuery) -> int:
        q, mirrored = dualize_query(h)
        nodes, leaves = self._sides[mirrored]
        lo, hi = 0, self.t
        confirmed = False
        while hi - lo > 1:
            mid = (lo + hi) // 2
            self.calls += 1
            if envelope_below(nodes[(lo, hi)], q):
                hi, confirmed = mid, True
            else:
                lo, confirmed = mid, False
        if not confirmed:
            self.calls += 1
            if not envelope_below(leaves[lo], q):
                raise NotFound("halfspace contains no point")
        return lo


def first_nonempty_group(idx: GroupMaxIndex, h: HalfspaceQuery) -> int:
    return idx.first_nonempty(h)


class RangeMaxIndex:
    """Heaviest point in a halfspace: group search over singleton groups sorted
    by (weight desc, id asc)."""

    def __init__(self, pos, weights, linear: bool = False):
        weights = np.asarray(weights, dtype=np.float64)
        self.order = np.lexsort((np.arange(len(weights)), -weights))
        self.index = GroupMaxIndex(pos, [np.array([i]) for i in self.order], linear=linear)

    def query(self, h: HalfspaceQuery) -> int:
        return int(self.order[self.index.first_nonempty(h)])


def range_max(idx: RangeMaxIndex, h: HalfspaceQuery) -> int:
    return idx.query(h)
