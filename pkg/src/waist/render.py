"""Static SVG figures of a solved problem.

The markup is written by hand with fixed number formatting so that the same
inputs always give the same bytes.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .geometry import AxisBox, Ball, Halfspace, Line, Polygon2D, Problem, Segment

WIDTH = 640
MARGIN = 24
COLORS = ("#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
          "#bcbd22", "#17becf", "#ff7f0e")

# orthographic view used for R^3: azimuth 35 deg, elevation 25 deg
_AZ, _EL = math.radians(35.0), math.radians(25.0)
_VIEW = np.array([
    [-math.sin(_AZ), math.cos(_AZ), 0.0],
    [-math.sin(_EL) * math.cos(_AZ), -math.sin(_EL) * math.sin(_AZ), math.cos(_EL)],
    [math.cos(_EL) * math.cos(_AZ), math.cos(_EL) * math.sin(_AZ), math.sin(_EL)],
])


class RenderError(ValueError):
    pass


def _f(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


class _Canvas:
    """Maps data coordinates to SVG pixels (y axis flipped)."""

    def __init__(self, lo, hi):
        span = np.maximum(hi - lo, 1e-9)
        self.scale = (WIDTH - 2 * MARGIN) / float(span.max())
        self.lo = lo
        self.height = int(math.ceil(2 * MARGIN + span[1] * self.scale))
        self.items = []

    def xy(self, p):
        x = MARGIN + (p[0] - self.lo[0]) * self.scale
        y = self.height - MARGIN - (p[1] - self.lo[1]) * self.scale
        return _f(x), _f(y)

    def circle(self, c, r, style):
        x, y = self.xy(c)
        self.items.append(f'<circle cx="{x}" cy="{y}" r="{_f(r * self.scale)}" {style}/>')

    def marker(self, p, radius_px, style):
        x, y = self.xy(p)
        self.items.append(f'<circle cx="{x}" cy="{y}" r="{_f(radius_px)}" {style}/>')

    def poly(self, pts, style, closed=False):
        coords = " ".join(",".join(self.xy(p)) for p in pts)
        tag = "polygon" if closed else "polyline"
        self.items.append(f'<{tag} points="{coords}" {style}/>')

    def text(self, p, label, style='font-size="12" font-family="sans-serif"'):
        x, y = self.xy(p)
        self.items.append(f'<text x="{x}" y="{y}" {style}>{label}</text>')

    def svg(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
                f'height="{self.height}" viewBox="0 0 {WIDTH} {self.height}">')
        body = "\n".join(["  " + it for it in self.items])
        return f'{head}\n  <rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n'


def _set_style(i: int) -> str:
    c = COLORS[i % len(COLORS)]
    return f'fill="{c}" fill-opacity="0.15" stroke="{c}" stroke-width="1.5"'


def _clip_line(base, direction, lo, hi):
    # long enough to leave the drawing box; the SVG viewport clips the rest
    reach = 2.0 * float(np.linalg.norm(hi - lo)) + float(np.linalg.norm(base - lo))
    return [base - reach * direction, base + reach * direction]


def _bounds_2d(problem: Problem, point_sets):
    pts = [np.asarray(p) for p in point_sets]
    for s in problem.sets:
        if isinstance(s, Ball):
            pts += [s.center - s.radius, s.center + s.radius]
        elif isinstance(s, AxisBox):
            pts += [s.lo, s.hi]
        elif isinstance(s, Segment):
            pts += [s.p, s.q]
        elif isinstance(s, Polygon2D):
            pts += list(s.vertices)
    allpts = np.vstack([np.atleast_2d(p) for p in pts])
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    pad = 0.05 * max(float((hi - lo).max()), 1.0)
    return lo - pad, hi + pad


def _draw_chain(cv: _Canvas, final, start, paths):
    m = len(final)
    for i in range(m):
        if paths is not None and len(paths) > 1:
            cv.poly(paths[:, i, :], 'fill="none" stroke="#555555" stroke-width="1" '
                    'stroke-dasharray="3,2"')
    # m = 2 gives a polygon with two vertices, drawn as a doubled segment
    cv.poly(final, 'fill="none" stroke="black" stroke-width="2"', closed=True)
    if start is not None:
        for p in start:
            cv.marker(p, 4.0, 'fill="white" stroke="black"')
    for i, p in enumerate(final):
        cv.marker(p, 3.5, 'fill="black"')
        cv.text(p, f"a{i + 1}")


def _render_2d(problem: Problem, final, start, paths) -> str:
    extra = [final] + ([start] if start is not None else [])
    if paths is not None:
        extra.append(paths.reshape(-1, 2))
    lo, hi = _bounds_2d(problem, [np.vstack(extra)])
    cv = _Canvas(lo, hi)
    for i, s in enumerate(problem.sets):
        style = _set_style(i)
        if isinstance(s, Ball):
            cv.circle(s.center, s.radius, style)
        elif isinstance(s, AxisBox):
            cv.poly(s.corners()[[0, 1, 3, 2]], style, closed=True)
        elif isinstance(s, Polygon2D):
            cv.poly(s.vertices, style, closed=True)
        elif isinstance(s, Segment):
            cv.poly([s.p, s.q], style.replace('fill-opacity="0.15"', 'fill-opacity="0"'))
        elif isinstance(s, Line):
            cv.poly(_clip_line(s.base, s.direction, lo, hi), style)
        elif isinstance(s, Halfspace):
            foot = s.normal * s.offset
            along = np.array([-s.normal[1], s.normal[0]])
            cv.poly(_clip_line(foot, along, lo, hi), style + ' stroke-dasharray="6,3"')
    _draw_chain(cv, final, start, paths)
    return cv.svg()


def _render_3d(problem: Problem, final, start, paths) -> str:
    def proj(x):
        return np.asarray(x, dtype=float) @ _VIEW[:2].T

    def depth(x):
        return float(np.asarray(x, dtype=float) @ _VIEW[2])

    pts2 = [proj(final)]
    if start is not None:
        pts2.append(proj(start))
    if paths is not None:
        pts2.append(proj(paths.reshape(-1, 3)))
    for s in problem.sets:
        if isinstance(s, Ball):
            c = proj(s.center)
            pts2 += [np.atleast_2d(c - s.radius), np.atleast_2d(c + s.radius)]
        elif isinstance(s, AxisBox):
            pts2.append(proj(s.corners()))
        elif isinstance(s, Segment):
            pts2.append(proj(np.array([s.p, s.q])))
    allpts = np.vstack(pts2)
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    pad = 0.05 * max(float((hi - lo).max()), 1.0)
    lo, hi = lo - pad, hi + pad
    cv = _Canvas(lo, hi)

    # painter's order: farthest outline first (largest depth is nearest the viewer)
    shapes = []
    for i, s in enumerate(problem.sets):
        if isinstance(s, Ball):
            shapes.append((depth(s.center), i, s))
        elif isinstance(s, AxisBox):
            shapes.append((depth((s.lo + s.hi) / 2), i, s))
        elif isinstance(s, Segment):
            shapes.append((depth((s.p + s.q) / 2), i, s))
        elif isinstance(s, Line):
            shapes.append((depth(s.base), i, s))
    shapes.sort(key=lambda t: (t[0], t[1]))
    for _, i, s in shapes:
        style = _set_style(i)
        if isinstance(s, Ball):
            cv.circle(proj(s.center), s.radius, style)
        elif isinstance(s, AxisBox):
            c = s.corners()
            for a in range(len(c)):
                for b in range(a + 1, len(c)):
                    if np.count_nonzero(c[a] != c[b]) == 1:
                        cv.poly(proj(np.array([c[a], c[b]])), style)
        elif isinstance(s, Segment):
            cv.poly(proj(np.array([s.p, s.q])), style)
        elif isinstance(s, Line):
            d2 = proj(s.direction)
            nrm = float(np.linalg.norm(d2))
            if nrm > 1e-12:
                cv.poly(_clip_line(proj(s.base), d2 / nrm, lo, hi), style)
    fp = proj(final)
    sp = None if start is None else proj(start)
    pp = None if paths is None else np.array([proj(p) for p in paths])
    _draw_chain(cv, fp, sp, pp)
    return cv.svg()


def figure_svg(problem: Problem, result) -> str:
    """SVG markup for ``result`` (a SolveResult) on ``problem``."""
    n = problem.dimension
    if n not in (2, 3):
        raise RenderError("rendering supports dimensions 2 and 3")
    final = np.asarray(result.final, dtype=float)
    start = None if result.start is None else np.asarray(result.start, dtype=float)
    paths = None
    if result.trace:
        seq = [start] if start is not None else []
        seq += [np.asarray(r.points) for r in result.trace]
        paths = np.array(seq)
    if n == 2:
        return _render_2d(problem, final, start, paths)
    return _render_3d(problem, final, start, paths)


def render_figure(problem: Problem, result, path) -> Path:
    """Write the figure for ``result`` to ``path`` and return the path."""
    svg = figure_svg(problem, result)
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    return path
