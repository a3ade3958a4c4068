"""JSON problem files, trace CSVs and run summaries."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import SET_TYPES, GeometryError, Problem, make_set
from .solver import (Constant, Diminishing, ExactLineSearch, SolveResult, SolverConfig,
                     StepRule)

SET_PARAMETERS = {
    "ball": ("center", "radius"),
    "box": ("lo", "hi"),
    "segment": ("p", "q"),
    "line": ("base", "direction"),
    "halfspace": ("normal", "offset"),
    "polygon": ("vertices",),
}
TOP_KEYS = {"dimension", "sets", "start", "solver", "outputs", "oracle"}
SOLVER_KEYS = {"method", "step_rule", "alpha", "c", "alpha_max", "refresh", "tolerance",
               "max_iterations", "aitken", "aitken_mode"}
OUTPUT_KEYS = {"trace_csv", "summary_json", "figure_svg"}
ORACLE_KEYS = {"resolution", "refine_rounds"}
STEP_RULES = ("constant", "diminishing", "exact-line-search")


class ProblemFileError(ValueError):
    """Schema or geometry violation; the message starts with the offending path."""


@dataclass
class ParsedProblem:
    problem: Problem
    start: np.ndarray
    config: SolverConfig
    method: str = "psd"
    outputs: dict = field(default_factory=dict)
    oracle: Optional[dict] = None
    start_given: bool = True


def _fail(path: str, msg: str):
    raise ProblemFileError(f"{path}: {msg}")


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        _fail(path, "expected an object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        _fail(path, "unknown keys " + ", ".join(unknown))


def _number(value, path, *, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, "expected a number")
    if integer and not float(value).is_integer():
        _fail(path, "expected an integer")
    if positive and not value > 0:
        _fail(path, "must be > 0")
    return int(value) if integer else float(value)


def _parse_set(entry, path, dimension):
    _check_keys(entry, {"type", "parameters"}, path)
    kind = entry.get("type")
    if kind not in SET_PARAMETERS:
        _fail(f"{path}.type", f"unknown set type {kind!r}; expected one of "
              + ", ".join(sorted(SET_TYPES)))
    params = entry.get("parameters")
    if params is None:
        _fail(f"{path}.parameters", "missing")
    _check_keys(params, SET_PARAMETERS[kind], f"{path}.parameters")
    missing = [k for k in SET_PARAMETERS[kind] if k not in params]
    if missing:
        _fail(f"{path}.parameters", "missing " + ", ".join(missing))
    try:
        s = make_set(kind, **params)
    except GeometryError as exc:
        msg = str(exc)
        name, _, rest = msg.partition(": ")
        if name in SET_PARAMETERS[kind]:
            _fail(f"{path}.parameters.{name}", rest)
        _fail(f"{path}.parameters", msg)
    except (TypeError, ValueError) as exc:
        _fail(f"{path}.parameters", str(exc))
    if s.dimension != dimension:
        _fail(path, f"set lives in R^{s.dimension}, problem dimension is {dimension}")
    return s


def _parse_step_rule(sv, path) -> StepRule:
    rule = sv.get("step_rule", "constant")
    if rule == "constant":
        if "alpha" not in sv:
            _fail(f"{path}.alpha", "required for the constant step rule")
        return Constant(_number(sv["alpha"], f"{path}.alpha", positive=True))
    if rule == "diminishing":
        return Diminishing(_number(sv.get("c", 1.0), f"{path}.c", positive=True))
    if rule == "exact-line-search":
        refresh = sv.get("refresh", "once")
        if refresh not in ("once", "every"):
            _fail(f"{path}.refresh", "must be 'once' or 'every'")
        return ExactLineSearch(
            _number(sv.get("alpha_max", 10.0), f"{path}.alpha_max", positive=True), refresh)
    _fail(f"{path}.step_rule", f"must be one of {', '.join(STEP_RULES)}")


def default_start(problem: Problem) -> np.ndarray:
    """Project, for each set, the centroid of the other sets' representative points."""
    reps = np.array([s.representative_point() for s in problem.sets])
    total = reps.sum(axis=0)
    m = problem.m
    return np.array([s.project((total - reps[i]) / (m - 1))
                     for i, s in enumerate(problem.sets)])


def parse_problem(document: str) -> ParsedProblem:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"<document>: invalid JSON ({exc})") from None
    _check_keys(doc, TOP_KEYS, "<document>")
    if "dimension" not in doc:
        _fail("dimension", "missing")
    dimension = _number(doc["dimension"], "dimension", positive=True, integer=True)
    sets = doc.get("sets")
    if not isinstance(sets, list) or len(sets) < 2:
        _fail("sets", "expected a list of at least two sets")
    parsed = [_parse_set(e, f"sets[{i}]", dimension) for i, e in enumerate(sets)]
    problem = Problem(tuple(parsed))

    start_given = "start" in doc and doc["start"] is not None
    if start_given:
        start = np.asarray(doc["start"], dtype=float) if isinstance(doc["start"], list) else None
        if start is None or start.shape != (problem.m, dimension):
            _fail("start", f"expected {problem.m} points of dimension {dimension}")
        if not np.all(np.isfinite(start)):
            _fail("start", "coordinates must be finite")
    else:
        start = default_start(problem)

    sv = doc.get("solver", {})
    _check_keys(sv, SOLVER_KEYS, "solver")
    method = sv.get("method", "psd")
    if method not in ("psd", "nag"):
        _fail("solver.method", "must be 'psd' or 'nag'")
    rule = _parse_step_rule(sv, "solver") if sv else Constant(1.0)
    if method == "nag" and not isinstance(rule, Constant):
        _fail("solver.step_rule", "nag requires the constant step rule")
    aitken = sv.get("aitken", False)
    if not isinstance(aitken, bool):
        _fail("solver.aitken", "expected true or false")
    mode = sv.get("aitken_mode", "vector")
    if mode not in ("vector", "coordinate"):
        _fail("solver.aitken_mode", "must be 'vector' or 'coordinate'")
    config = SolverConfig(
        step_rule=rule,
        tolerance=_number(sv.get("tolerance", 1e-12), "solver.tolerance", positive=True),
        max_iterations=_number(sv.get("max_iterations", 10000), "solver.max_iterations",
                               positive=True, integer=True),
        aitken=aitken,
        aitken_mode=mode,
    )

    outputs = doc.get("outputs", {})
    _check_keys(outputs, OUTPUT_KEYS, "outputs")
    for k, v in outputs.items():
        if v is not None and not isinstance(v, str):
            _fail(f"outputs.{k}", "expected a file path")

    oracle = doc.get("oracle")
    if oracle is not None:
        _check_keys(oracle, ORACLE_KEYS, "oracle")
        oracle = {
            "resolution": _number(oracle.get("resolution", 360), "oracle.resolution",
                                  positive=True, integer=True),
            "refine_rounds": _number(oracle.get("refine_rounds", 20),
                                     "oracle.refine_rounds", integer=True),
        }
    return ParsedProblem(problem, start, config, method, dict(outputs), oracle, start_given)


def _rule_dict(rule: StepRule) -> dict:
    if isinstance(rule, Constant):
        return {"step_rule": "constant", "alpha": rule.alpha}
    if isinstance(rule, Diminishing):
        return {"step_rule": "diminishing", "c": rule.c}
    return {"step_rule": "exact-line-search", "alpha_max": rule.alpha_max,
            "refresh": rule.refresh}


def serialize_problem(problem: Problem, start=None, config: Optional[SolverConfig] = None,
                      method: str = "psd", outputs: Optional[dict] = None,
                      oracle: Optional[dict] = None) -> str:
    doc = {"dimension": problem.dimension, "sets": [s.to_dict() for s in problem.sets]}
    if start is not None:
        doc["start"] = np.asarray(start, dtype=float).tolist()
    if config is not None:
        doc["solver"] = {
            "method": method,
            **_rule_dict(config.step_rule),
            "tolerance": config.tolerance,
            "max_iterations": config.max_iterations,
            "aitken": config.aitken,
            "aitken_mode": config.aitken_mode,
        }
    if outputs:
        doc["outputs"] = dict(outputs)
    if oracle:
        doc["oracle"] = dict(oracle)
    return json.dumps(doc, indent=2)


# -- run outputs -----------------------------------------------------------------

def _axis_names(n: int):
    return "xyz"[:n] if n <= 3 else [f"c{j}" for j in range(n)]


def trace_csv(result: SolveResult) -> str:
    """Per-iteration table: k, coordinates of every point, D_k, |delta D_k|, xi.

    Floats are printed with 6 decimals; xi is blank where undefined.
    """
    m, n = result.final.shape
    header = ["k"] + [f"a{i + 1}_{ax}" for i in range(m) for ax in _axis_names(n)]
    header += ["D_k", "delta_D_k", "xi"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in result.trace:
        row = [str(r.k)] + [f"{c:.6f}" for c in np.asarray(r.points).ravel()]
        row += [f"{r.value:.6f}", f"{r.delta:.6f}", "" if r.xi is None else f"{r.xi:.6f}"]
        w.writerow(row)
    return buf.getvalue()


def summary_dict(result: SolveResult, certificate=None, diagnostics=None,
                 oracle=None) -> dict:
    out = {
        "method": result.method,
        "step": result.step_label,
        "value": result.value,
        "iterations": result.iterations,
        "termination": result.termination.value,
        "residual": result.residual,
        "final": result.final.tolist(),
        "start": None if result.start is None else result.start.tolist(),
        "aitken_accepted": result.aitken_accepted,
    }
    if certificate is not None:
        out["certificate"] = certificate.to_dict()
    if diagnostics is not None:
        out["diagnostics"] = diagnostics.to_dict()
    if oracle is not None:
        out["oracle"] = {
            "value": oracle.value,
            "grid_value": oracle.grid_value,
            "resolution": oracle.resolution,
            "points": oracle.points.tolist(),
            "seeded_value": oracle.seeded_value,
        }
    return out
