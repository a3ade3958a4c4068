import json
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from waist.geometry import AxisBox, Ball, Polygon2D, Problem, Segment

settings.register_profile(
    "waist", derandomize=True, deadline=None, max_examples=1000,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("waist")

ROOT = Path(__file__).resolve().parent.parent
PROBLEMS = ROOT / "problems"

DISC_START = np.array([[1.0, 3.0], [10.0, 4.0], [1.0, 11.0]])
DISC_ALPHA = 2.0707749
# last row of the published disc iteration table
DISC_TABLE_FINAL = np.array([[2.72314, 3.69069], [6.14043, 4.73623], [4.26532, 8.01175]])
DISC_VALUE = 11.935945

SPHERE_START = np.array([[3.0, 3.0, -1.0], [5.0, -2.0, 1.0], [6.0, 4.0, 2.0]])
SPHERE_ALPHA = 1.7432
SPHERE_TABLE_FINAL = np.array([[3.29841, 1.92953, 0.08085],
                               [3.99411, -0.01038, 0.79662],
                               [4.62414, 1.87690, 1.08041]])
SPHERE_VALUE = 5.852600


def disc_problem() -> Problem:
    return Problem((Ball([2, 3], 1), Ball([8, 4], 2), Ball([4, 11], 3)))


def sphere_problem() -> Problem:
    return Problem((Ball([2, 3, -1], 2), Ball([4, -2, 1], 2), Ball([6, 3, 2], 2)))


def two_ball_problem() -> Problem:
    return Problem((Ball([0, 0], 1), Ball([5, 0], 1)))


def catalog():
    """Problems in general position with pairwise disjoint sets."""
    return [
        ("disc", disc_problem(), DISC_START, 1.0),
        ("sphere", sphere_problem(), SPHERE_START, 1.0),
        ("two balls", two_ball_problem(), [[0, 1], [5, -1]], 0.5),
        ("mixed 2d", Problem((
            Polygon2D([[0, 0], [2, 0], [2, 1], [0, 1]]),
            Segment([8, -1], [9, 3]),
            Ball([4, 8], 1.5),
        )), [[1, 0.5], [8.5, 1], [4, 8]], 0.5),
        ("boxes 3d", Problem((
            AxisBox([0, 0, 0], [1, 1, 1]),
            AxisBox([5, 0, 0], [6, 1, 2]),
            Ball([2, 6, 1], 1),
        )), [[0.5, 0.5, 0.5], [5.5, 0.5, 1], [2, 6, 1]], 0.5),
    ]


@pytest.fixture
def disc():
    return disc_problem()


@pytest.fixture
def sphere():
    return sphere_problem()


@pytest.fixture
def two_balls():
    return two_ball_problem()


@pytest.fixture
def disc_file_text():
    return (PROBLEMS / "disc.json").read_text()


def load_problem_json(name: str) -> dict:
    return json.loads((PROBLEMS / name).read_text())


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
