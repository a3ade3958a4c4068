"""Command-line driver: solve problem files, run step-size benchmarks, query the oracle.

Exit status is 0 when the solver met its tolerance, 2 when it ran out of
iterations and 1 on any error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .diagnostics import certify, diagnose
from .geometry import GeometryError
from .oracle import OracleError, brute_force_min
from .problemfile import (ProblemFileError, ParsedProblem, parse_problem, summary_dict,
                          trace_csv)
from .render import RenderError, render_figure
from .solver import (Constant, Diminishing, ExactLineSearch, SolverConfig, SolverError,
                     Termination, solve)

log = logging.getLogger("waist")

EXIT_OK, EXIT_ERROR, EXIT_MAX_ITER = 0, 1, 2
BENCH_COLUMNS = ("method", "alpha", "tolerance", "iterations", "cpu_seconds")


class CliError(RuntimeError):
    pass


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write(path: Path, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}") from None


def _apply_overrides(parsed: ParsedProblem, args) -> ParsedProblem:
    cfg = parsed.config
    rule = cfg.step_rule
    kind = args.step_rule
    if kind is None and args.alpha is not None:
        kind = "constant"
    if kind == "constant":
        alpha = args.alpha if args.alpha is not None else getattr(rule, "alpha", None)
        if alpha is None:
            raise CliError("--step-rule constant needs --alpha")
        rule = Constant(alpha)
    elif kind == "diminishing":
        rule = Diminishing(args.alpha if args.alpha is not None else 1.0)
    elif kind == "exact-line-search":
        refresh = getattr(rule, "refresh", "once")
        rule = ExactLineSearch(args.alpha if args.alpha is not None else 10.0, refresh)
    changes = {"step_rule": rule}
    if args.tol is not None:
        changes["tolerance"] = args.tol
    if args.max_iter is not None:
        changes["max_iterations"] = args.max_iter
    if args.aitken:
        changes["aitken"] = True
    method = args.method or parsed.method
    try:
        cfg = replace(cfg, **changes)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    return replace(parsed, config=cfg, method=method)


def _output_paths(parsed: ParsedProblem, source: Path, out_dir) -> dict:
    outputs = {k: v for k, v in parsed.outputs.items() if v}
    base = Path(out_dir) if out_dir else Path.cwd()
    if out_dir:
        stem = source.stem
        outputs.setdefault("trace_csv", f"{stem}_trace.csv")
        outputs.setdefault("summary_json", f"{stem}_summary.json")
        if parsed.problem.dimension in (2, 3):
            outputs.setdefault("figure_svg", f"{stem}.svg")
    return {k: (p if Path(p).is_absolute() else base / p) for k, p in
            ((k, Path(v)) for k, v in outputs.items())}


def run_solve(args) -> int:
    source = Path(args.file)
    parsed = _apply_overrides(parse_problem(_read(source)), args)
    if parsed.method == "nag" and not isinstance(parsed.config.step_rule, Constant):
        raise CliError("--method nag needs a constant step rule")
    if not parsed.start_given:
        log.info("no start given; using projected centroids of the other sets")
    result = solve(parsed.problem, parsed.start, parsed.config, parsed.method)
    cert = certify(parsed.problem, result.final)
    report = diagnose(parsed.problem)
    oracle = None
    if args.oracle or parsed.oracle is not None:
        opts = parsed.oracle or {}
        res = args.resolution or opts.get("resolution", 360)
        oracle = brute_force_min(parsed.problem, res, opts.get("refine_rounds", 20),
                                 seed=result.final)
    summary = summary_dict(result, cert, report, oracle)

    paths = _output_paths(parsed, source, args.out_dir)
    if "trace_csv" in paths:
        _write(paths["trace_csv"], trace_csv(result))
    if "summary_json" in paths:
        _write(paths["summary_json"], json.dumps(summary, indent=2) + "\n")
    if "figure_svg" in paths:
        try:
            render_figure(parsed.problem, result, paths["figure_svg"])
        except OSError as exc:
            raise CliError(f"cannot write {paths['figure_svg']}: {exc.strerror or exc}") from None

    print(f"method      {result.method} (step {result.step_label})")
    print(f"D*          {result.value:.6f}")
    print(f"iterations  {result.iterations}")
    print(f"termination {result.termination.value}")
    print(f"residual    {result.residual:.3e}  certified={cert.certified}")
    if oracle is not None:
        print(f"oracle      {oracle.value:.6f} (resolution {oracle.resolution})")
    for i, p in enumerate(result.final):
        print(f"a{i + 1}*         " + " ".join(f"{c:.6f}" for c in p))
    if result.termination is Termination.TOLERANCE_MET:
        return EXIT_OK
    if result.termination is Termination.MAX_ITERATIONS:
        return EXIT_MAX_ITER
    return EXIT_ERROR


# -- benchmark -----------------------------------------------------------------

def parse_grid(document: str):
    """Benchmark grid: ``{"strategies": [...], "tolerances": [...], "max_iterations": N}``.

    Each strategy is ``{"method": "psd"|"nag", "step_rule": ..., "alpha"/"c": ...,
    "aitken": bool}``.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise CliError(f"grid: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise CliError("grid: expected an object")
    unknown = sorted(set(doc) - {"strategies", "tolerances", "max_iterations"})
    if unknown:
        raise CliError("grid: unknown keys " + ", ".join(unknown))
    strategies = doc.get("strategies")
    tolerances = doc.get("tolerances")
    if not isinstance(strategies, list) or not strategies:
        raise CliError("grid.strategies: expected a non-empty list")
    if not isinstance(tolerances, list) or not tolerances:
        raise CliError("grid.tolerances: expected a non-empty list")
    allowed = {"method", "step_rule", "alpha", "c", "alpha_max", "refresh", "aitken"}
    for i, s in enumerate(strategies):
        if not isinstance(s, dict):
            raise CliError(f"grid.strategies[{i}]: expected an object")
        bad = sorted(set(s) - allowed)
        if bad:
            raise CliError(f"grid.strategies[{i}]: unknown keys " + ", ".join(bad))
    return strategies, [float(t) for t in tolerances], int(doc.get("max_iterations", 100000))


def _strategy_rule(s: dict):
    kind = s.get("step_rule", "constant")
    if kind == "constant":
        return Constant(float(s["alpha"]))
    if kind == "diminishing":
        return Diminishing(float(s.get("c", 1.0)))
    if kind == "exact-line-search":
        return ExactLineSearch(float(s.get("alpha_max", 10.0)), s.get("refresh", "once"))
    raise ValueError(f"unknown step rule {kind!r}")


def _run_cell(problem, start, strategy: dict, tol: float, max_iter: int):
    method = strategy.get("method", "psd")
    cfg = SolverConfig(step_rule=_strategy_rule(strategy), tolerance=tol,
                       max_iterations=max_iter, aitken=bool(strategy.get("aitken", False)),
                       record_trace=False)
    t0 = time.process_time()
    res = solve(problem, start, cfg, method)
    cpu = time.process_time() - t0
    label = "psd+aitken" if cfg.aitken and method == "psd" else method
    return {"method": label, "alpha": cfg.step_rule.label, "tolerance": f"{tol:g}",
            "iterations": res.iterations, "cpu_seconds": f"{cpu:.4f}",
            "termination": res.termination.value}


def benchmark(problem, start, strategies, tolerances, max_iterations=100000, jobs=1):
    """Run every (strategy, tolerance) cell; failed cells are logged and dropped.

    Returns the list of row dicts in grid order.  With ``jobs > 1`` the cells
    run in separate processes; each solve is independent and deterministic,
    so the rows do not depend on ``jobs``.
    """
    cells = [(s, t) for s in strategies for t in tolerances]
    rows = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_cell, problem, start, s, t, max_iterations)
                       for s, t in cells]
            outcomes = []
            for fut in futures:
                try:
                    outcomes.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - one bad cell must not stop the rest
                    outcomes.append(exc)
    else:
        outcomes = []
        for s, t in cells:
            try:
                outcomes.append(_run_cell(problem, start, s, t, max_iterations))
            except Exception as exc:  # noqa: BLE001
                outcomes.append(exc)
    for (s, t), out in zip(cells, outcomes):
        if isinstance(out, Exception):
            log.error("benchmark cell %s tol=%g failed: %s", s, t, out)
            continue
        if out["termination"] != Termination.TOLERANCE_MET.value:
            log.warning("benchmark cell %s tol=%g stopped with %s", s, t, out["termination"])
        rows.append(out)
    return rows


def bench_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, extrasaction="ignore",
                       lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def run_bench(args) -> int:
    parsed = parse_problem(_read(args.file))
    strategies, tolerances, max_iter = parse_grid(_read(args.grid))
    if args.max_iter is not None:
        max_iter = args.max_iter
    rows = benchmark(parsed.problem, parsed.start, strategies, tolerances, max_iter, args.jobs)
    text = bench_csv(rows)
    if args.out_dir:
        _write(Path(args.out_dir) / f"{Path(args.file).stem}_bench.csv", text)
    sys.stdout.write(text)
    return EXIT_OK


def run_oracle(args) -> int:
    parsed = parse_problem(_read(args.file))
    opts = parsed.oracle or {}
    res = args.resolution or opts.get("resolution", 360)
    t0 = time.perf_counter()
    out = brute_force_min(parsed.problem, res, opts.get("refine_rounds", 20))
    elapsed = time.perf_counter() - t0
    print(f"oracle D*   {out.value:.6f} (grid {out.grid_value:.6f}, resolution {res}, "
          f"{elapsed:.2f} s)")
    for i, p in enumerate(out.points):
        print(f"a{i + 1}*         " + " ".join(f"{c:.6f}" for c in p))
    if args.out_dir:
        doc = {"value": out.value, "grid_value": out.grid_value, "resolution": res,
               "points": out.points.tolist()}
        _write(Path(args.out_dir) / f"{Path(args.file).stem}_oracle.json",
               json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="waist", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("file", help="problem file (JSON)")
        sp.add_argument("--out-dir", help="directory for output files")
        sp.add_argument("--max-iter", type=int, help="iteration cap")

    s = sub.add_parser("solve", help="solve one problem file")
    common(s)
    s.add_argument("--tol", type=float, help="stopping tolerance on |D_k - D_{k-1}|")
    s.add_argument("--alpha", type=float,
                   help="constant step, c for diminishing, alpha_max for line search")
    s.add_argument("--step-rule", choices=("constant", "diminishing", "exact-line-search"))
    s.add_argument("--aitken", action="store_true", help="enable Aitken extrapolation")
    s.add_argument("--method", choices=("psd", "nag"))
    s.add_argument("--oracle", action="store_true", help="also run the brute-force oracle")
    s.add_argument("--resolution", type=int, help="oracle grid resolution")
    s.set_defaults(func=run_solve)

    b = sub.add_parser("bench", help="iteration counts over a strategy/tolerance grid")
    common(b)
    b.add_argument("--grid", required=True, help="benchmark grid file (JSON)")
    b.add_argument("--jobs", type=int, default=1, help="worker processes")
    b.set_defaults(func=run_bench)

    o = sub.add_parser("oracle", help="brute-force boundary minimum")
    common(o)
    o.add_argument("--resolution", type=int, help="samples per chart parameter")
    o.set_defaults(func=run_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ProblemFileError, GeometryError, SolverError, OracleError,
            RenderError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
