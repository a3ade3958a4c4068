"""Hypothesis checks and optimality certificates for a waist problem."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from itertools import combinations

import numpy as np
from scipy.optimize import nnls
from scipy.spatial import ConvexHull, QhullError

from .geometry import (MEMBERSHIP_TOL, AxisBox, Ball, ConvexSet, Halfspace, Line,
                       Polygon2D, Problem, Segment, set_distance)
from .objective import block_residuals, normal_sum_norm, subgradient


class GeneralPosition(str, Enum):
    VERIFIED = "Verified"
    VIOLATED = "Violated"
    UNKNOWN = "Unknown"


@dataclass
class DiagnosticsReport:
    pairwise_disjoint: bool
    min_pairwise_distance: float
    general_position: list
    strictly_convex: list
    bounded: list
    uniqueness_expected: bool
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["general_position"] = [gp.value for gp in self.general_position]
        return out


@dataclass
class Certificate:
    certified: bool
    residual: float
    normal_sum_norm: float
    # per vertex: (angle to previous neighbour, angle to next neighbour) measured
    # from the outward normal, or None at interior points
    incidence_angles: list

    def to_dict(self) -> dict:
        return asdict(self)


def check_pairwise_disjoint(problem: Problem, tol: float = 1e-9):
    """Return ``(all pairs farther apart than tol, smallest pairwise distance)``."""
    dmin = math.inf
    for a, b in combinations(problem.sets, 2):
        dmin = min(dmin, set_distance(a, b)[0])
    return dmin > tol, dmin


# -- general position ----------------------------------------------------------

class _PointHull:
    """Convex hull of a finite point cloud, projected onto via NNLS."""

    kind = "hull"

    def __init__(self, points: np.ndarray):
        pts = np.asarray(points, dtype=float)
        if pts.shape[1] >= 2 and len(pts) > pts.shape[1] + 1:
            try:
                pts = pts[ConvexHull(pts).vertices]
            except QhullError:
                pass
        self.points = pts
        self.dimension = pts.shape[1]
        self._scale = 1.0 + float(np.abs(pts).max())

    def representative_point(self):
        return self.points.mean(axis=0)

    def project(self, x):
        # min |P^T w - x| over the simplex; the affine constraint is a heavily
        # weighted extra row
        weight = 1e4 * self._scale
        a = np.vstack([self.points.T, np.full(len(self.points), weight)])
        b = np.concatenate([x, [weight]])
        w, _ = nnls(a, b, maxiter=50 * a.shape[1])
        return self.points.T @ w


def boundary_samples(s: ConvexSet, count: int, window: float):
    """Deterministic boundary samples of ``s`` and the largest gap between them.

    Returns ``(points, gap)``; ``gap`` is 0 when the samples span ``s``
    exactly.  Returns ``(None, inf)`` for sets that cannot be sampled.
    """
    if isinstance(s, Ball):
        r = s.radius
        if s.dimension == 2:
            ang = 2.0 * np.pi * np.arange(count) / count
            pts = s.center + r * np.column_stack([np.cos(ang), np.sin(ang)])
            return pts, 2.0 * r * math.sin(math.pi / count)
        if s.dimension == 3:
            # Fibonacci lattice
            i = np.arange(count) + 0.5
            z = 1.0 - 2.0 * i / count
            rho = np.sqrt(1.0 - z * z)
            phi = np.pi * (3.0 - math.sqrt(5.0)) * i
            unit = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
            return s.center + r * unit, r * math.sqrt(8.0 * math.pi / count)
        return None, math.inf
    if isinstance(s, Segment):
        return np.array([s.p, s.q]), 0.0
    if isinstance(s, Polygon2D):
        return np.array(s.vertices), 0.0
    if isinstance(s, AxisBox):
        return s.corners(), 0.0
    if isinstance(s, Line):
        return np.array([s.base - window * s.direction, s.base + window * s.direction]), 0.0
    return None, math.inf


def _problem_diameter(problem: Problem) -> float:
    reps = np.array([s.representative_point() for s in problem.sets])
    spread = float(np.max(np.linalg.norm(reps[:, None] - reps[None], axis=-1)))
    extent = 0.0
    for s in problem.sets:
        if isinstance(s, Ball):
            extent = max(extent, 2 * s.radius)
        elif isinstance(s, (Segment, Polygon2D, AxisBox)):
            pts, _ = boundary_samples(s, 8, 0.0)
            extent = max(extent, float(np.ptp(pts, axis=0).max()))
    return max(spread + extent, 1.0)


def check_general_position(problem: Problem, samples_per_set: int = 256) -> list:
    """Sampled test of "each set misses the convex hull of the others".

    The hull of boundary samples is an inner approximation of the true hull,
    so ``Violated`` is always sound; ``Verified`` is reported only when the
    distance clears a margin of half the sample gap times the chain's
    Lipschitz constant ``2m``.
    """
    if samples_per_set < 8:
        raise ValueError("samples_per_set: must be >= 8")
    m = problem.m
    if m == 2:
        disjoint, _ = check_pairwise_disjoint(problem)
        verdict = GeneralPosition.VERIFIED if disjoint else GeneralPosition.VIOLATED
        return [verdict, verdict]
    window = 10.0 * _problem_diameter(problem)
    samples = [boundary_samples(s, samples_per_set, window) for s in problem.sets]
    verdicts = []
    for i, ci in enumerate(problem.sets):
        others = [samples[j] for j in range(m) if j != i]
        clouds = [pts for pts, _ in others if pts is not None]
        if not clouds:
            verdicts.append(GeneralPosition.UNKNOWN)
            continue
        gap = max(g for _, g in others)
        partial = any(pts is None for pts, _ in others)
        unbounded = any(not problem.sets[j].bounded for j in range(m) if j != i)
        hull = _PointHull(np.vstack(clouds))
        if isinstance(ci, Ball):
            c = ci.center
            d = max(float(np.linalg.norm(c - hull.project(c))) - ci.radius, 0.0)
        else:
            d, _, _ = set_distance(ci, hull, max_iter=2000)
        if d <= 1e-9:
            verdicts.append(GeneralPosition.VIOLATED)
        elif not (partial or unbounded) and d > 0.5 * gap * 2 * m:
            verdicts.append(GeneralPosition.VERIFIED)
        else:
            verdicts.append(GeneralPosition.UNKNOWN)
    return verdicts


def diagnose(problem: Problem, samples_per_set: int = 256) -> DiagnosticsReport:
    disjoint, dmin = check_pairwise_disjoint(problem)
    gp = check_general_position(problem, samples_per_set)
    strict = [s.strictly_convex for s in problem.sets]
    bounded = [s.bounded for s in problem.sets]
    unique = all(v == GeneralPosition.VERIFIED for v in gp) and all(strict)
    notes = []
    if not disjoint:
        notes.append("sets overlap: the subgradient can be undefined at solutions")
    if not all(bounded):
        notes.append(
            "unbounded sets present: a minimizer exists only under the usual "
            "boundedness/growth conditions; the solver may drift")
    if any(strict) and not all(strict):
        notes.append(
            "some but not all sets are strictly convex; uniqueness is only "
            "guaranteed here when every set is strictly convex")
    if any(v == GeneralPosition.VIOLATED for v in gp):
        notes.append("general position fails: optimal points may lie off the boundaries")
    if any(isinstance(s, Halfspace) for s in problem.sets):
        notes.append("halfspaces cannot be sampled; general position is Unknown near them")
    return DiagnosticsReport(disjoint, dmin, gp, strict, bounded, unique, notes)


# -- certificates ----------------------------------------------------------------

def _angle(u: np.ndarray, v: np.ndarray) -> float:
    c = float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.acos(min(1.0, max(-1.0, c)))


def certify(problem: Problem, config, tol: float = 1e-6,
            active_tol: float = MEMBERSHIP_TOL) -> Certificate:
    """Check the first-order optimality condition at a feasible configuration.

    Besides the residual, reports the incidence angles of the two chain edges
    at each vertex, measured from the outward normal picked out by ``-g_i``.
    At a certified optimum on smooth boundaries these agree (reflection law).
    ``active_tol`` is the slack within which a point counts as on the
    boundary; raise it for configurations known only to a few decimals.
    """
    pts = problem.check_configuration(config)
    res = block_residuals(problem, pts, active_tol)
    g = subgradient(pts)
    m = problem.m
    angles = []
    for i, s in enumerate(problem.sets):
        nrm = s.normal_cone_projection(pts[i], -g[i], active_tol)
        if np.linalg.norm(nrm) < 1e-12:
            angles.append(None)
            continue
        to_prev = pts[(i - 1) % m] - pts[i]
        to_next = pts[(i + 1) % m] - pts[i]
        angles.append((_angle(nrm, to_prev), _angle(nrm, to_next)))
    residual = float(res.max())
    return Certificate(residual <= tol, residual, normal_sum_norm(pts), angles)
