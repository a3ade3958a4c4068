"""Brute-force reference minimizer over boundary parameterizations.

Independent of the descent solvers: it enumerates a product grid of boundary
points exactly (a pruned cyclic shortest-path search), then polishes the best
grid cycle by cyclic coordinate descent on the chart parameters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .geometry import AxisBox, Ball, ConvexSet, Line, Polygon2D, Problem, Segment
from .objective import perimeter


class OracleError(ValueError):
    """The problem contains a set without a boundary chart."""


@dataclass(frozen=True)
class BoundaryChart:
    set_index: int
    parameter_dim: int
    bounds: tuple  # ((lo, hi), ...) per parameter
    periodic: tuple
    fn: Callable[[np.ndarray], np.ndarray]  # (k, parameter_dim) -> (k, n)

    def __call__(self, params) -> np.ndarray:
        params = np.atleast_2d(np.asarray(params, dtype=float))
        return self.fn(params)

    def grid(self, resolution: int) -> np.ndarray:
        """Parameters of a grid that is nested under doubling of ``resolution``."""
        axes = []
        for (lo, hi), per in zip(self.bounds, self.periodic):
            if per:
                axes.append(lo + (hi - lo) * np.arange(resolution) / resolution)
            else:
                axes.append(lo + (hi - lo) * np.arange(resolution + 1) / resolution)
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([g.ravel() for g in mesh])

    def spacing(self, resolution: int) -> np.ndarray:
        return np.array([(hi - lo) / resolution for lo, hi in self.bounds])


def _polygon_chart(i: int, poly: Polygon2D) -> BoundaryChart:
    verts, edges = poly.vertices, poly.edges
    lengths = np.linalg.norm(edges, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])

    def fn(params):
        # vectorized form of Polygon2D.boundary_point
        target = (params[:, 0] % 1.0) * cum[-1]
        k = np.minimum(np.searchsorted(cum, target, side="right") - 1, len(lengths) - 1)
        return verts[k] + ((target - cum[k]) / lengths[k])[:, None] * edges[k]

    return BoundaryChart(i, 1, ((0.0, 1.0),), (True,), fn)


def chart_for(s: ConvexSet, index: int, window: float = 1e3) -> BoundaryChart:
    """Boundary chart of one set; lines are truncated to ``[-window, window]``."""
    if isinstance(s, Ball) and s.dimension == 2:
        c, r = s.center, s.radius

        def fn(params):
            t = params[:, 0]
            return c + r * np.column_stack([np.cos(t), np.sin(t)])

        return BoundaryChart(index, 1, ((0.0, 2 * math.pi),), (True,), fn)
    if isinstance(s, Ball) and s.dimension == 3:
        c, r = s.center, s.radius

        def fn(params):
            th, ph = params[:, 0], params[:, 1]
            return c + r * np.column_stack(
                [np.cos(th) * np.sin(ph), np.sin(th) * np.sin(ph), np.cos(ph)])

        return BoundaryChart(index, 2, ((0.0, 2 * math.pi), (0.0, math.pi)), (True, False), fn)
    if isinstance(s, Segment):
        p, q = s.p, s.q

        def fn(params):
            return p + params[:, :1] * (q - p)

        return BoundaryChart(index, 1, ((0.0, 1.0),), (False,), fn)
    if isinstance(s, Line):
        b, d = s.base, s.direction

        def fn(params):
            return b + params[:, :1] * d

        return BoundaryChart(index, 1, ((-window, window),), (False,), fn)
    if isinstance(s, Polygon2D):
        return _polygon_chart(index, s)
    if isinstance(s, AxisBox) and s.dimension == 2:
        lo, hi = s.lo, s.hi
        if np.all(hi > lo):
            verts = [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]]
            return _polygon_chart(index, Polygon2D(verts))
    raise OracleError(f"set {index} ({s.kind} in R^{s.dimension}) has no boundary chart")


@dataclass
class OracleResult:
    value: float
    points: np.ndarray
    params: list
    grid_value: float
    grid_points: np.ndarray
    resolution: int
    seeded_value: Optional[float] = None

    def __iter__(self):
        # unpacks as (value, configuration)
        return iter((self.value, self.points))


def _dist_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1), 0.0))


def _grid_min(grids: list, upper: float = math.inf):
    """Exact minimum of the cyclic chain length over a product of point grids.

    For every candidate first point the cycle is a shortest path through the
    remaining grids.  A cycle through ``a_1`` and ``a_j`` is at least
    ``2 |a_1 - a_j|`` long, so points farther than ``best / 2`` from ``a_1``
    are dropped; the pruning never discards a strictly better cycle.  Ties go
    to the lexicographically first index tuple.
    """
    first, rest = grids[0], grids[1:]
    best, best_idx = upper, None
    # distances between consecutive later grids do not depend on a_1; keep them
    # when they fit comfortably in memory
    cached = [_dist_matrix(a, b) if len(a) * len(b) <= 4_000_000 else None
              for a, b in zip(rest, rest[1:])]
    for i0 in range(len(first)):
        a1 = first[i0]
        cands = []
        ok = True
        for g in rest:
            d = np.linalg.norm(g - a1, axis=1)
            idx = np.flatnonzero(2.0 * d <= best)
            if idx.size == 0:
                ok = False
                break
            cands.append((idx, d[idx]))
        if not ok:
            continue
        cost = cands[0][1]
        back = []
        for j in range(1, len(rest)):
            prev_idx, cur_idx = cands[j - 1][0], cands[j][0]
            if cached[j - 1] is not None:
                step = cached[j - 1][np.ix_(prev_idx, cur_idx)]
            else:
                step = _dist_matrix(rest[j - 1][prev_idx], rest[j][cur_idx])
            total = cost[:, None] + step
            arg = np.argmin(total, axis=0)
            back.append(arg)
            cost = total[arg, np.arange(total.shape[1])]
        cost = cost + cands[-1][1]
        k = int(np.argmin(cost))
        if cost[k] < best or best_idx is None and cost[k] <= best:
            path = [k]
            for arg in reversed(back):
                path.append(int(arg[path[-1]]))
            path.reverse()
            best = float(cost[k])
            best_idx = [i0] + [int(cands[j][0][path[j]]) for j in range(len(rest))]
    return best, best_idx


def _refine(charts, params, rounds: int, step: list, tol: float = 1e-10):
    params = [np.array(p, dtype=float) for p in params]
    pts = np.array([ch(p)[0] for ch, p in zip(charts, params)])
    value = perimeter(pts)
    for _ in range(rounds):
        moved = 0.0
        for i, ch in enumerate(charts):
            for j in range(ch.parameter_dim):
                lo_b, hi_b = ch.bounds[j]
                centre = params[i][j]
                lo, hi = centre - step[i][j], centre + step[i][j]
                if not ch.periodic[j]:
                    lo, hi = max(lo, lo_b), min(hi, hi_b)

                def f(t, i=i, j=j):
                    trial = params[i].copy()
                    trial[j] = t
                    cand = pts.copy()
                    cand[i] = ch(trial)[0]
                    return perimeter(cand)

                res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                      options={"xatol": 1e-12})
                if res.fun < value:
                    moved = max(moved, abs(res.x - centre))
                    params[i][j] = res.x
                    pts[i] = ch(params[i])[0]
                    value = perimeter(pts)
        if moved < tol:
            break
    return value, pts, params


def _window(problem: Problem) -> float:
    reps = np.array([s.representative_point() for s in problem.sets])
    spread = float(np.max(np.linalg.norm(reps[:, None] - reps[None], axis=-1)))
    return 10.0 * max(spread, 1.0)


def brute_force_min(problem: Problem, resolution: int = 360, refine_rounds: int = 20,
                    seed=None) -> OracleResult:
    """Grid search over the boundary charts followed by coordinate descent.

    ``resolution`` samples per chart parameter (spherical charts use
    ``resolution`` azimuths and ``resolution + 1`` polar angles).  The grid
    stage is exact on the grid, so its value is within the grid spacing
    times the Lipschitz constant ``2m`` of the boundary minimum.  With
    ``seed`` (for example a solver result) its projected value is reported
    alongside, for problems whose optimum may leave the boundaries.
    """
    if resolution < 1:
        raise ValueError("resolution: must be >= 1")
    window = _window(problem)
    charts = [chart_for(s, i, window) for i, s in enumerate(problem.sets)]
    params = [ch.grid(resolution) for ch in charts]
    grids = [ch(p) for ch, p in zip(charts, params)]
    # a coarse sub-grid (every stride-th point) gives a cheap upper bound
    stride = max(1, max(len(g) for g in grids) // 64)
    coarse_val, _ = _grid_min([g[::stride] for g in grids])
    grid_val, idx = _grid_min(grids, coarse_val)
    grid_pts = np.array([g[i] for g, i in zip(grids, idx)])
    start_params = [p[i] for p, i in zip(params, idx)]
    step = [ch.spacing(resolution) for ch in charts]
    value, pts, fine = _refine(charts, start_params, refine_rounds, step)
    seeded = None
    if seed is not None:
        seeded = perimeter(problem.project(seed))
    return OracleResult(value, pts, [p.tolist() for p in fine], grid_val, grid_pts,
                        resolution, seeded)
