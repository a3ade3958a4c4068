"""Cyclic perimeter of a configuration, its subgradient, and optimality residuals.

A configuration is an ``(m, n)`` array whose row ``i`` is the point chosen in
set ``i``.  Indices wrap around: the neighbours of row 0 are rows ``m-1`` and 1.
"""
from __future__ import annotations

import numpy as np

from .geometry import MEMBERSHIP_TOL, GeometryError, Problem


class NonsmoothPointError(ValueError):
    """Raised where two cyclically adjacent points coincide."""


def _points(config) -> np.ndarray:
    pts = np.asarray(config, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise GeometryError("configuration must be an (m, n) array with m >= 2")
    return pts


def edge_lengths(config) -> np.ndarray:
    """Lengths ``|a_i - a_{i+1}|`` of the closed chain, ``a_m`` joined to ``a_1``."""
    pts = _points(config)
    return np.linalg.norm(pts - np.roll(pts, -1, axis=0), axis=1)


def perimeter(config) -> float:
    return float(edge_lengths(config).sum())


def subgradient(config) -> np.ndarray:
    """Block subgradient field of the perimeter.

    Row ``i`` is ``unit(a_i - a_{i-1}) + unit(a_i - a_{i+1})``, so every row
    has norm at most 2.

    Raises
    ------
    NonsmoothPointError
        If two adjacent points coincide; the perimeter has no unique
        subgradient there.
    """
    pts = _points(config)
    prev = pts - np.roll(pts, 1, axis=0)
    nxt = pts - np.roll(pts, -1, axis=0)
    lp = np.linalg.norm(prev, axis=1)
    ln = np.linalg.norm(nxt, axis=1)
    if np.any(lp == 0.0) or np.any(ln == 0.0):
        raise NonsmoothPointError("nonsmooth point: adjacent points coincide")
    return prev / lp[:, None] + nxt / ln[:, None]


def normal_sum_norm(config) -> float:
    """Norm of the summed block normals ``-g_i``; zero at any optimum."""
    return float(np.linalg.norm(subgradient(config).sum(axis=0)))


def block_residuals(problem: Problem, config, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
    pts = problem.check_configuration(config)
    for i, (s, p) in enumerate(zip(problem.sets, pts)):
        if not s.contains(p, tol):
            raise GeometryError(
                f"infeasible configuration: point {i} is {s.distance(p):.3e} "
                f"outside its {s.kind}"
            )
    g = subgradient(pts)
    return np.array(
        [s.normal_cone_distance(p, -gi, tol) for s, p, gi in zip(problem.sets, pts, g)]
    )


def optimality_residual(problem: Problem, config, tol: float = MEMBERSHIP_TOL) -> float:
    """Largest distance from ``-g_i`` to the normal cone of set ``i`` at ``a_i``.

    Zero exactly when the configuration satisfies the first-order condition,
    which for this convex problem certifies global optimality.
    """
    return float(block_residuals(problem, config, tol).max())
