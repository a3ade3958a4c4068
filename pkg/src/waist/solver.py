"""Projected subgradient descent for the cyclic perimeter, plus accelerated variants.

All solvers share the stopping rule ``|D(k+1) - D_prev| < tolerance`` with
``D_prev`` starting at +inf, and a Jacobi-style block update: every
subgradient block is taken from iterate ``k`` before any block is projected.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np

from .geometry import Problem
from .objective import NonsmoothPointError, optimality_residual, perimeter, subgradient

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# -- step rules ----------------------------------------------------------------

@dataclass(frozen=True)
class Constant:
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha: must be > 0")

    @property
    def label(self) -> str:
        return f"{self.alpha:.10g}"


@dataclass(frozen=True)
class Diminishing:
    """``alpha_k = c / k`` for k = 1, 2, ...; not summable but square summable."""

    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c: must be > 0")

    @property
    def label(self) -> str:
        return f"{self.c:g}/k"


@dataclass(frozen=True)
class ExactLineSearch:
    alpha_max: float = 10.0
    refresh: str = "once"  # "once" or "every"

    def __post_init__(self):
        if not self.alpha_max > 0:
            raise ValueError("alpha_max: must be > 0")
        if self.refresh not in ("once", "every"):
            raise ValueError("refresh: must be 'once' or 'every'")

    @property
    def label(self) -> str:
        return f"exact-{self.refresh}"


StepRule = Union[Constant, Diminishing, ExactLineSearch]


class Termination(str, Enum):
    TOLERANCE_MET = "ToleranceMet"
    MAX_ITERATIONS = "MaxIterations"
    STALLED_DENOMINATOR = "StalledDenominator"


@dataclass(frozen=True)
class SolverConfig:
    step_rule: StepRule = Constant(1.0)
    tolerance: float = 1e-12
    max_iterations: int = 10000
    aitken: bool = False
    aitken_mode: str = "vector"  # "vector" or "coordinate"
    aitken_guard: float = 1e-12
    record_trace: bool = True

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance: must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations: must be >= 1")
        if self.aitken_mode not in ("vector", "coordinate"):
            raise ValueError("aitken_mode: must be 'vector' or 'coordinate'")
        if not self.aitken_guard > 0:
            raise ValueError("aitken_guard: must be > 0")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    points: np.ndarray
    value: float
    delta: float
    xi: Optional[float] = None


@dataclass
class SolveResult:
    final: np.ndarray
    value: float
    iterations: int
    termination: Termination
    residual: float
    trace: list = field(default_factory=list)
    start: Optional[np.ndarray] = None
    method: str = "psd"
    step_label: str = ""
    aitken_accepted: int = 0


class SolverError(RuntimeError):
    """A solve that could not continue; ``trace`` holds the iterates so far."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


# -- building blocks ---------------------------------------------------------

def golden_section(f, lo: float, hi: float, width: float = 1e-10, max_iter: int = 500):
    """Minimize a scalar function on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= width:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def exact_line_search(problem: Problem, config, direction, alpha_max: float) -> float:
    """Step length minimizing the perimeter along the projected ray.

    ``phi(alpha) = D(P(config + alpha * direction))`` with ``P`` the block-wise
    projection.  The right end of the bracket ``[0, alpha_max]`` is doubled
    while ``phi`` keeps decreasing there; golden-section search then narrows
    ``[0, 2 hi]`` to width 1e-10, ``hi`` being the last point of decrease.
    The result never increases ``phi`` over ``phi(0)``.
    """
    if not alpha_max > 0:
        raise ValueError("alpha_max: must be > 0")
    x0 = problem.check_configuration(config)
    p = np.asarray(direction, dtype=float)
    if not np.any(p):
        return 0.0

    def phi(alpha):
        val = perimeter(problem.project(x0 + alpha * p))
        if not math.isfinite(val):
            raise SolverError(f"non-finite objective along line at alpha={alpha!r}")
        return val

    hi = float(alpha_max)
    f_hi = phi(hi)
    right = hi
    for _ in range(64):
        right = 2.0 * hi
        f_next = phi(right)
        if not f_next < f_hi:
            break
        hi, f_hi = right, f_next
    # phi stopped decreasing between hi and 2 hi, so [0, 2 hi] brackets the minimum
    alpha, f_alpha = golden_section(phi, 0.0, right)
    if f_hi < f_alpha:
        alpha, f_alpha = hi, f_hi
    return alpha if f_alpha <= phi(0.0) else 0.0


def aitken_transform(s0, s1, s2, guard: float = 1e-12):
    """Coordinate-wise Aitken delta-squared extrapolation of three iterates.

    Coordinates whose second difference is below ``guard`` in magnitude are
    copied from ``s2``.  Returns None when every coordinate is guarded.
    """
    s0, s1, s2 = (np.asarray(s, dtype=float) for s in (s0, s1, s2))
    den = s2 - 2.0 * s1 + s0
    ok = np.abs(den) >= guard
    if not ok.any():
        return None
    out = s2.copy()
    out[ok] = s0[ok] - (s1[ok] - s0[ok]) ** 2 / den[ok]
    return out


def aitken_vector_transform(s0, s1, s2, guard: float = 1e-12):
    """Aitken extrapolation with one scalar ratio for the whole stacked vector.

    ``s2 - (<d1, d2> / |d2|^2) d1`` with ``d1 = s2 - s1`` and ``d2`` the second
    difference; it coincides with the scalar formula in one dimension.
    Returns None when ``|d2| < guard``.
    """
    s0, s1, s2 = (np.asarray(s, dtype=float) for s in (s0, s1, s2))
    d1 = s2 - s1
    d2 = s2 - 2.0 * s1 + s0
    den = float(np.sum(d2 * d2))
    if math.sqrt(den) < guard:
        return None
    return s2 - (float(np.sum(d1 * d2)) / den) * d1


# -- drivers -------------------------------------------------------------------

def _prepare_start(problem: Problem, start) -> np.ndarray:
    pts = problem.check_configuration(start)
    if not np.all(np.isfinite(pts)):
        raise SolverError("start configuration has non-finite coordinates")
    if not problem.is_feasible(pts):
        log.warning("start configuration is infeasible; projecting it onto the sets")
        pts = problem.project(pts)
    return np.array(pts, dtype=float)


def _warn_if_overlapping(problem: Problem):
    from .diagnostics import check_pairwise_disjoint

    disjoint, dmin = check_pairwise_disjoint(problem)
    if not disjoint:
        log.warning(
            "sets are not pairwise disjoint (min distance %.3e); the subgradient "
            "may become undefined", dmin)


def _with_xi(records: list) -> list:
    if not records:
        return records
    final = records[-1].value
    errs = [abs(r.value - final) for r in records]
    out = []
    for i, r in enumerate(records):
        xi = None
        if i + 1 < len(records) and errs[i] > 0:
            xi = errs[i + 1] / errs[i]
        out.append(IterationRecord(r.k, r.points, r.value, r.delta, xi))
    return out


class _Recorder:
    def __init__(self, enabled: bool, start_value: float):
        self.enabled = enabled
        self.records = []
        self.last_value = start_value

    def add(self, k, points, value):
        if self.enabled:
            pts = points.copy()
            pts.setflags(write=False)
            self.records.append(IterationRecord(k, pts, value, abs(value - self.last_value)))
        self.last_value = value


def _check_value(value, recorder):
    if not math.isfinite(value):
        raise SolverError("non-finite objective value", recorder.records)


def _subgradient(points, recorder):
    try:
        return subgradient(points)
    except NonsmoothPointError as exc:
        raise SolverError(str(exc), recorder.records) from exc


def _finish(problem, start, a, value, k, termination, recorder, method, label, accepted=0):
    return SolveResult(
        final=a,
        value=value,
        iterations=k,
        termination=termination,
        residual=optimality_residual(problem, a),
        trace=_with_xi(recorder.records),
        start=start,
        method=method,
        step_label=label,
        aitken_accepted=accepted,
    )


def psd_solve(problem: Problem, start, cfg: SolverConfig) -> SolveResult:
    """Projected subgradient descent.

    Each iteration computes the full subgradient field at the current
    configuration, steps every block by ``-alpha_k g_i`` and projects each
    block onto its set.  With ``cfg.aitken`` set this delegates to
    :func:`psd_solve_aitken`.
    """
    if cfg.aitken:
        return psd_solve_aitken(problem, start, cfg)
    return _psd(problem, start, cfg, accelerate=False)


def psd_solve_aitken(problem: Problem, start, cfg: SolverConfig) -> SolveResult:
    """Projected subgradient descent with gated Aitken extrapolation.

    From the third iterate on, the last three iterates are extrapolated, the
    result is projected back onto the sets, and it replaces the plain
    iterate only if it strictly lowers the perimeter.  After an accepted jump
    the extrapolation history restarts from the accepted point.
    """
    return _psd(problem, start, cfg, accelerate=True)


def _step_size(rule: StepRule, k: int, problem, a, g, frozen):
    if isinstance(rule, Constant):
        return rule.alpha, frozen
    if isinstance(rule, Diminishing):
        return rule.c / k, frozen
    if isinstance(rule, ExactLineSearch):
        if rule.refresh == "once" and frozen is not None:
            return frozen, frozen
        alpha = exact_line_search(problem, a, -g, rule.alpha_max)
        return alpha, alpha
    raise TypeError(f"unknown step rule {rule!r}")


def _psd(problem: Problem, start, cfg: SolverConfig, accelerate: bool) -> SolveResult:
    a = _prepare_start(problem, start)
    start_pts = a.copy()
    _warn_if_overlapping(problem)
    transform = aitken_vector_transform if cfg.aitken_mode == "vector" else aitken_transform
    rec = _Recorder(cfg.record_trace, perimeter(a))
    d_prev = math.inf
    frozen = None
    history = [a]
    accepted = 0
    termination = Termination.MAX_ITERATIONS
    value = perimeter(a)
    k = 0
    for k in range(1, cfg.max_iterations + 1):
        g = _subgradient(a, rec)
        alpha, frozen = _step_size(cfg.step_rule, k, problem, a, g, frozen)
        a = problem.project(a - alpha * g)
        stalled = False
        if accelerate:
            history = (history + [a])[-3:]
            if len(history) == 3:
                t = transform(*history, guard=cfg.aitken_guard)
                if t is None:
                    stalled = True
                else:
                    t = problem.project(t)
                    if perimeter(t) < perimeter(a):
                        a = t
                        history = [a]
                        accepted += 1
        value = perimeter(a)
        _check_value(value, rec)
        rec.add(k, a, value)
        if abs(value - d_prev) < cfg.tolerance:
            termination = Termination.TOLERANCE_MET
            break
        if stalled:
            termination = Termination.STALLED_DENOMINATOR
            break
        d_prev = value
    method = "psd+aitken" if accelerate else "psd"
    return _finish(problem, start_pts, a, value, k, termination, rec, method,
                   cfg.step_rule.label, accepted)


def nag_solve(problem: Problem, start, alpha: float, tol: float = 1e-12,
              max_iter: int = 10000, record_trace: bool = True) -> SolveResult:
    """Nesterov-accelerated projected subgradient method.

    Momentum weights follow ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2`` from
    ``t_1 = 1``.  The extrapolated point is projected onto the sets before
    the subgradient is evaluated there, so the subgradient is only ever taken
    at feasible configurations.
    """
    if not alpha > 0:
        raise ValueError("alpha: must be > 0")
    if not tol > 0:
        raise ValueError("tol: must be > 0")
    x = _prepare_start(problem, start)
    start_pts = x.copy()
    _warn_if_overlapping(problem)
    x_prev = x
    t = 1.0
    rec = _Recorder(record_trace, perimeter(x))
    d_prev = math.inf
    termination = Termination.MAX_ITERATIONS
    value = perimeter(x)
    k = 0
    for k in range(1, max_iter + 1):
        t_next = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        beta = (t - 1.0) / t_next
        y = problem.project(x + beta * (x - x_prev))
        g = _subgradient(y, rec)
        x_prev, x = x, problem.project(y - alpha * g)
        t = t_next
        value = perimeter(x)
        _check_value(value, rec)
        rec.add(k, x, value)
        if abs(value - d_prev) < tol:
            termination = Termination.TOLERANCE_MET
            break
        d_prev = value
    return _finish(problem, start_pts, x, value, k, termination, rec, "nag", f"{alpha:.10g}")


def solve(problem: Problem, start, cfg: SolverConfig, method: str = "psd") -> SolveResult:
    """Dispatch on ``method`` ("psd" or "nag"); NAG needs a constant step."""
    if method == "psd":
        return psd_solve(problem, start, cfg)
    if method == "nag":
        if not isinstance(cfg.step_rule, Constant):
            raise ValueError("nag requires a constant step rule")
        return nag_solve(problem, start, cfg.step_rule.alpha, cfg.tolerance,
                         cfg.max_iterations, cfg.record_trace)
    raise ValueError(f"unknown method {method!r}")
