"""Closed convex sets with exact Euclidean projections.

Every set is an immutable value.  Points are 1-D float arrays; the sets
accept anything ``np.asarray`` understands.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MEMBERSHIP_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid set parameters, or a point of the wrong dimension."""


def _vector(x, name: str = "point") -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise GeometryError(f"{name}: expected a non-empty 1-D coordinate list")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name}: coordinates must be finite")
    arr.setflags(write=False)
    return arr


def _unit(x, name: str) -> np.ndarray:
    arr = np.array(x, dtype=float)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise GeometryError(f"{name}: must be nonzero")
    return _vector(arr / norm, name)


def _ray_projection(v: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Nearest point to ``v`` on the ray {t*u : t >= 0}, ``u`` a unit vector."""
    return max(float(v @ u), 0.0) * u


class ConvexSet:
    """Base class for the projectable sets.

    Subclasses implement :meth:`project` and :meth:`normal_cone_projection`;
    everything else is derived from those two.
    """

    kind: str = ""
    strictly_convex: bool = False
    bounded: bool = True

    @property
    def dimension(self) -> int:
        raise NotImplementedError

    def project(self, x) -> np.ndarray:
        raise NotImplementedError

    def normal_cone_projection(self, x: np.ndarray, v: np.ndarray,
                               tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        """Nearest point to ``v`` in the normal cone at ``x`` (``x`` in the set).

        Constraints within ``tol`` of being tight at ``x`` count as active.
        """
        raise NotImplementedError

    def representative_point(self) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> dict:
        raise NotImplementedError

    # -- derived -----------------------------------------------------------

    def _check(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        if arr.shape != (self.dimension,):
            raise GeometryError(
                f"dimension mismatch: {self.kind} lives in R^{self.dimension}, "
                f"got point of shape {arr.shape}"
            )
        return arr

    def distance(self, x) -> float:
        arr = self._check(x)
        return float(np.linalg.norm(arr - self.project(arr)))

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        if tol < 0:
            raise GeometryError("tol must be >= 0")
        return self.distance(x) <= tol

    def normal_cone_distance(self, x, v, tol: float = MEMBERSHIP_TOL) -> float:
        x = self._check(x)
        v = self._check(v)
        if not self.contains(x, tol):
            raise GeometryError(
                f"normal cone queried at a point outside the {self.kind} "
                f"(distance {self.distance(x):.3e})"
            )
        return float(np.linalg.norm(v - self.normal_cone_projection(x, v, tol)))

    def to_dict(self) -> dict:
        return {"type": self.kind, "parameters": self.parameters()}

    def __eq__(self, other):
        if not isinstance(other, ConvexSet):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))


def _params(**arrays) -> dict:
    return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in arrays.items()}


@dataclass(frozen=True, eq=False)
class Ball(ConvexSet):
    center: np.ndarray
    radius: float

    kind = "ball"
    strictly_convex = True

    def __post_init__(self):
        object.__setattr__(self, "center", _vector(self.center, "center"))
        r = float(self.radius)
        if not (r > 0 and math.isfinite(r)):
            raise GeometryError("radius: must be > 0")
        object.__setattr__(self, "radius", r)

    @property
    def dimension(self) -> int:
        return self.center.size

    def project(self, x) -> np.ndarray:
        x = self._check(x)
        d = x - self.center
        dist = float(np.linalg.norm(d))
        if dist <= self.radius:
            return x
        return self.center + (self.radius / dist) * d

    def normal_cone_projection(self, x, v, tol=MEMBERSHIP_TOL):
        d = x - self.center
        dist = float(np.linalg.norm(d))
        if dist < self.radius - tol:
            return np.zeros_like(v)
        return _ray_projection(v, d / dist)

    def representative_point(self):
        return self.center

    def parameters(self):
        return _params(center=self.center, radius=self.radius)


@dataclass(frozen=True, eq=False)
class AxisBox(ConvexSet):
    lo: np.ndarray
    hi: np.ndarray

    kind = "box"

    def __post_init__(self):
        lo = _vector(self.lo, "lo")
        hi = _vector(self.hi, "hi")
        if lo.shape != hi.shape:
            raise GeometryError("lo/hi: dimension mismatch")
        if np.any(lo > hi):
            raise GeometryError("lo: must be <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dimension(self):
        return self.lo.size

    def project(self, x):
        x = self._check(x)
        if np.all(x >= self.lo) and np.all(x <= self.hi):
            return x
        return np.clip(x, self.lo, self.hi)

    def normal_cone_projection(self, x, v, tol=MEMBERSHIP_TOL):
        # product of 1-D cones: R at degenerate faces, R+ at hi, R- at lo, {0} inside
        at_lo = x <= self.lo + tol
        at_hi = x >= self.hi - tol
        out = np.zeros_like(v)
        both = at_lo & at_hi
        out[both] = v[both]
        only_hi = at_hi & ~at_lo
        out[only_hi] = np.maximum(v[only_hi], 0.0)
        only_lo = at_lo & ~at_hi
        out[only_lo] = np.minimum(v[only_lo], 0.0)
        return out

    def corners(self) -> np.ndarray:
        n = self.dimension
        idx = np.array(np.meshgrid(*[[0, 1]] * n, indexing="ij")).reshape(n, -1).T
        return np.where(idx == 1, self.hi, self.lo)

    def representative_point(self):
        return 0.5 * (self.lo + self.hi)

    def parameters(self):
        return _params(lo=self.lo, hi=self.hi)


@dataclass(frozen=True, eq=False)
class Segment(ConvexSet):
    p: np.ndarray
    q: np.ndarray

    kind = "segment"

    def __post_init__(self):
        p = _vector(self.p, "p")
        q = _vector(self.q, "q")
        if p.shape != q.shape:
            raise GeometryError("p/q: dimension mismatch")
        if np.array_equal(p, q):
            raise GeometryError("q: must differ from p")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def dimension(self):
        return self.p.size

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.q - self.p))

    def _param(self, x) -> float:
        e = self.q - self.p
        return float((x - self.p) @ e / (e @ e))

    def project(self, x):
        x = self._check(x)
        t = min(max(self._param(x), 0.0), 1.0)
        return self.p + t * (self.q - self.p)

    def normal_cone_projection(self, x, v, tol=MEMBERSHIP_TOL):
        e = (self.q - self.p) / self.length
        along = float(v @ e)
        t = self._param(x)
        eps = tol / self.length
        if t <= eps:
            # cone {w : w.e <= 0}
            return v - max(along, 0.0) * e
        if t >= 1.0 - eps:
            return v - min(along, 0.0) * e
        return v - along * e

    def representative_point(self):
        return 0.5 * (self.p + self.q)

    def parameters(self):
        return _params(p=self.p, q=self.q)


@dataclass(frozen=True, eq=False)
class Line(ConvexSet):
    base: np.ndarray
    direction: np.ndarray

    kind = "line"
    bounded = False

    def __post_init__(self):
        base = _vector(self.base, "base")
        direction = _unit(self.direction, "direction")
        if base.shape != direction.shape:
            raise GeometryError("base/direction: dimension mismatch")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "direction", direction)

    @property
    def dimension(self):
        return self.base.size

    def project(self, x):
        x = self._check(x)
        return self.base + float((x - self.base) @ self.direction) * self.direction

    def normal_cone_projection(self, x, v, tol=MEMBERSHIP_TOL):
        return v - float(v @ self.direction) * self.direction

    def representative_point(self):
        return self.base

    def parameters(self):
        return _params(base=self.base, direction=self.direction)


@dataclass(frozen=True, eq=False)
class Halfspace(ConvexSet):
    """The set {x : <normal, x> <= offset}."""

    normal: np.ndarray
    offset: float

    kind = "halfspace"
    bounded = False

    def __post_init__(self):
        object.__setattr__(self, "normal", _unit(self.normal, "normal"))
        off = float(self.offset)
        if not math.isfinite(off):
            raise GeometryError("offset: must be finite")
        object.__setattr__(self, "offset", off)

    @property
    def dimension(self):
        return self.normal.size

    def project(self, x):
        x = self._check(x)
        excess = float(self.normal @ x) - self.offset
        if excess <= 0:
            return x
        return x - excess * self.normal

    def normal_cone_projection(self, x, v, tol=MEMBERSHIP_TOL):
        if float(self.normal @ x) < self.offset - tol:
            return np.zeros_like(v)
        return _ray_projection(v, self.normal)

    def representative_point(self):
        return self.offset * self.normal

    def parameters(self):
        return _params(normal=self.normal, offset=self.offset)


@dataclass(frozen=True, eq=False)
class Polygon2D(ConvexSet):
    """Convex polygon in the plane, vertices in counterclockwise order."""

    vertices: np.ndarray

    kind = "polygon"

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise GeometryError("vertices: polygons are planar (n = 2)")
        if len(v) < 3:
            raise GeometryError("vertices: need at least 3")
        if not np.all(np.isfinite(v)):
            raise GeometryError("vertices: coordinates must be finite")
        if len(np.unique(v, axis=0)) != len(v):
            raise GeometryError("vertices: repeated vertex")
        edges = np.roll(v, -1, axis=0) - v
        nxt = np.roll(edges, -1, axis=0)
        cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
        if np.any(cross <= 0):
            raise GeometryError("vertices: must be strictly convex and counterclockwise")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def dimension(self):
        return 2

    @property
    def edges(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    @property
    def outward_normals(self) -> np.ndarray:
        e = self.edges
        nrm = np.column_stack([e[:, 1], -e[:, 0]])
        return nrm / np.linalg.norm(nrm, axis=1, keepdims=True)

    @property
    def perimeter(self) -> float:
        return float(np.linalg.norm(self.edges, axis=1).sum())

    def _signed(self, x) -> np.ndarray:
        return np.einsum("ij,ij->i", self.outward_normals, x - self.vertices)

    def project(self, x):
        if self.dimension != np.asarray(x).size:
            raise GeometryError("Polygon2D requires points in R^2")
        x = self._check(x)
        if np.all(self._signed(x) <= 0):
            return x
        best, best_d = None, math.inf
        for a, e in zip(self.vertices, self.edges):
            t = min(max(float((x - a) @ e / (e @ e)), 0.0), 1.0)
            y = a + t * e
            d = float(np.linalg.norm(x - y))
            if d < best_d:
                best, best_d = y, d
        return best

    def normal_cone_projection(self, x, v, tol=MEMBERSHIP_TOL):
        active = np.flatnonzero(self._signed(x) >= -tol)
        normals = self.outward_normals
        if active.size == 0:
            return np.zeros_like(v)
        if active.size == 1:
            return _ray_projection(v, normals[active[0]])
        k = len(self.vertices)
        # vertex: the two active edges are cyclically adjacent
        i, j = int(active[0]), int(active[-1])
        if not (j == i + 1 or (i == 0 and j == k - 1)):
            raise GeometryError("inconsistent active edges at polygon vertex")
        n1, n2 = normals[i], normals[j]
        coef = np.linalg.solve(np.column_stack([n1, n2]), v)
        if np.all(coef >= 0):
            return v.copy()
        c1, c2 = _ray_projection(v, n1), _ray_projection(v, n2)
        return c1 if np.linalg.norm(v - c1) <= np.linalg.norm(v - c2) else c2

    def boundary_point(self, s: float) -> np.ndarray:
        """Point at normalized arc length ``s`` (period 1) from vertex 0."""
        lengths = np.linalg.norm(self.edges, axis=1)
        target = (s % 1.0) * lengths.sum()
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        i = min(int(np.searchsorted(cum, target, side="right")) - 1, len(lengths) - 1)
        return self.vertices[i] + ((target - cum[i]) / lengths[i]) * self.edges[i]

    def representative_point(self):
        return self.vertices.mean(axis=0)

    def parameters(self):
        return _params(vertices=self.vertices)


@dataclass(frozen=True, eq=False)
class Problem:
    """Ordered tuple of sets sharing one ambient dimension; indices are cyclic."""

    sets: tuple

    def __post_init__(self):
        sets = tuple(self.sets)
        if len(sets) < 2:
            raise GeometryError("a problem needs at least two sets")
        dims = {s.dimension for s in sets}
        if len(dims) != 1:
            raise GeometryError(f"sets live in different dimensions: {sorted(dims)}")
        object.__setattr__(self, "sets", sets)

    @property
    def m(self) -> int:
        return len(self.sets)

    @property
    def dimension(self) -> int:
        return self.sets[0].dimension

    def __len__(self):
        return len(self.sets)

    def __getitem__(self, i) -> ConvexSet:
        return self.sets[i % len(self.sets)]

    def project(self, points) -> np.ndarray:
        """Block-wise projection of an (m, n) configuration."""
        pts = self.check_configuration(points)
        return np.array([s.project(p) for s, p in zip(self.sets, pts)])

    def is_feasible(self, points, tol: float = MEMBERSHIP_TOL) -> bool:
        pts = self.check_configuration(points)
        return all(s.contains(p, tol) for s, p in zip(self.sets, pts))

    def check_configuration(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.shape != (self.m, self.dimension):
            raise GeometryError(
                f"configuration shape {pts.shape} does not match problem "
                f"({self.m} sets in R^{self.dimension})"
            )
        return pts

    def __eq__(self, other):
        if not isinstance(other, Problem):
            return NotImplemented
        return self.sets == other.sets

    def __hash__(self):
        return hash(self.sets)


# -- module-level forms ------------------------------------------------------

def project(s: ConvexSet, x) -> np.ndarray:
    return s.project(x)


def contains(s: ConvexSet, x, tol: float = MEMBERSHIP_TOL) -> bool:
    return s.contains(x, tol)


def normal_cone_distance(s: ConvexSet, x, v) -> float:
    return s.normal_cone_distance(x, v)


def set_distance(a: ConvexSet, b: ConvexSet, max_iter: int = 10000, tol: float = 1e-13):
    """Distance between two closed convex sets by alternating projections.

    Returns ``(d, pa, pb)`` with ``pa`` in ``a`` and ``pb`` in ``b``.
    """
    if a.dimension != b.dimension:
        raise GeometryError("set_distance: dimension mismatch")
    start = 0.5 * (a.representative_point() + b.representative_point())
    pa = a.project(start)
    pb = b.project(pa)
    d = float(np.linalg.norm(pa - pb))
    for _ in range(max_iter):
        pa = a.project(pb)
        pb = b.project(pa)
        d_new = float(np.linalg.norm(pa - pb))
        if abs(d - d_new) < tol:
            d = d_new
            break
        d = d_new
    return d, pa, pb


def make_set(kind: str, **params) -> ConvexSet:
    """Construct a set from its type tag and parameters."""
    try:
        cls = SET_TYPES[kind]
    except KeyError:
        raise GeometryError(f"unknown set type {kind!r}") from None
    return cls(**params)


SET_TYPES = {
    cls.kind: cls for cls in (Ball, AxisBox, Segment, Line, Halfspace, Polygon2D)
}
