"""Brute-force oracles and hand-built topologies shared by the test modules.

The oracles never touch the grid: they sort whole relations.
"""

from __future__ import annotations

import math
import random
from collections import defaultdict

import pytest

from twoknn.geometry import Point
from twoknn.grid import GridIndex


def bf_dist(p: Point, q: Point) -> float:
    dx = p.x - q.x
    dy = p.y - q.y
    return math.sqrt(dx * dx + dy * dy)


def bf_knn(points: list[Point], focal: Point, k: int) -> list[Point]:
    return sorted(points, key=lambda p: (bf_dist(focal, p), p.id))[:k]


def bf_ids(points: list[Point], focal: Point, k: int) -> set[int]:
    return {p.id for p in bf_knn(points, focal, k)}


def bf_join(outer: list[Point], inner: list[Point], k: int) -> set[tuple[int, int]]:
    return {(o.id, i.id) for o in outer for i in bf_knn(inner, o, k)}


def bf_select_join_inner(e1, e2, k_join, k_select, f) -> set[tuple[int, int]]:
    sel = bf_ids(e2, f, k_select)
    return {(a, b) for a, b in bf_join(e1, e2, k_join) if b in sel}


def bf_unchained(a, b, c, k_ab, k_cb) -> set[tuple[int, int, int]]:
    by_b = defaultdict(list)
    for ci, bi in bf_join(c, b, k_cb):
        by_b[bi].append(ci)
    return {(ai, bi, ci) for ai, bi in bf_join(a, b, k_ab) for ci in by_b[bi]}


def bf_chained(a, b, c, k_ab, k_bc) -> set[tuple[int, int, int]]:
    by_b = defaultdict(list)
    for bi, ci in bf_join(b, c, k_bc):
        by_b[bi].append(ci)
    return {(ai, bi, ci) for ai, bi in bf_join(a, b, k_ab) for ci in by_b[bi]}


def bf_two_select(e, f1, k1, f2, k2) -> set[int]:
    return bf_ids(e, f1, k1) & bf_ids(e, f2, k2)


def rand_points(rng: random.Random, n: int, first_id: int = 0, lattice: int | None = None) -> list[Point]:
    """Uniform points, or distinct cells of a small integer lattice (many ties)."""
    if lattice is None:
        return [Point(first_id + i, rng.random(), rng.random()) for i in range(n)]
    cells = rng.sample([(x, y) for x in range(lattice) for y in range(lattice)], n)
    return [Point(first_id + i, float(x), float(y)) for i, (x, y) in enumerate(cells)]


# -- hand-built topologies ------------------------------------------------------
# Short names are stable labels; ids are fixed so expectations can be spelled
# out by name.


def _named(prefix_ids: dict[str, tuple[int, float, float]]) -> dict[str, Point]:
    return {name: Point(pid, x, y) for name, (pid, x, y) in prefix_ids.items()}


@pytest.fixture
def houses_and_malls():
    """Focal f, houses h1..h5 (inner), malls m1..m4 (outer)."""
    houses = _named({
        "h1": (1, -1.0, 0.0), "h2": (2, 1.0, 0.0), "h3": (3, -6.0, 4.0),
        "h4": (4, 6.0, 4.0), "h5": (5, -4.0, -4.0),
    })
    malls = _named({
        "m1": (11, -4.0, 2.0), "m2": (12, 0.0, -1.0), "m3": (13, 4.0, 2.0), "m4": (14, -2.0, -3.0),
    })
    index = GridIndex.fit({"M": list(malls.values()), "H": list(houses.values())})
    return index, houses, malls, Point(-1, 0.0, 0.0)


@pytest.fixture
def unchained_topology():
    """b1..b3 shared inner; a1, a2 and c1, c2 sit between the b's."""
    a = _named({"a1": (1, -1.0, 1.0), "a2": (2, -1.0, -1.0)})
    b = _named({"b1": (11, -2.0, 0.0), "b2": (12, 0.0, 0.0), "b3": (13, 2.0, 0.0)})
    c = _named({"c1": (21, 1.0, 1.0), "c2": (22, 1.0, -1.0)})
    index = GridIndex.fit({"A": list(a.values()), "B": list(b.values()), "C": list(c.values())})
    return index, a, b, c


@pytest.fixture
def chained_topology():
    """a1, a2 share the neighbors b2, b3; b1 is nobody's neighbor."""
    a = _named({"a1": (1, 1.0, 1.0), "a2": (2, 1.0, -1.0)})
    b = _named({"b1": (11, -6.0, 0.0), "b2": (12, 0.0, 0.0), "b3": (13, 2.0, 0.0)})
    c = _named({"c1": (21, -1.0, 0.5), "c2": (22, 1.0, 0.3), "c3": (23, -7.0, 1.0), "c4": (24, 3.0, 0.5)})
    index = GridIndex.fit({"A": list(a.values()), "B": list(b.values()), "C": list(c.values())})
    return index, a, b, c


@pytest.fixture
def restaurants():
    """Houses around a workplace W and a school S; x and y lie between them."""
    pts = _named({
        "x": (1, 0.0, 1.0), "y": (2, 0.0, -1.0),
        "l": (3, -3.0, 1.0), "m": (4, -3.0, -1.0), "z": (5, -4.0, 0.0),
        "n": (6, 3.0, 1.0), "p": (7, 3.0, -1.0), "o": (8, 4.0, 0.0),
    })
    index = GridIndex.fit({"E": list(pts.values())})
    return index, pts, Point(-1, -3.0, 0.0), Point(-2, 3.0, 0.0)


# -- acceptance report ---------------------------------------------------------

_CRITERIA: dict[str, str] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.outcome != "passed":
        if report.outcome == "failed" or name not in _CRITERIA:
            _CRITERIA[name] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        number, _, label = name[len("test_criterion_"):].partition("_")
        terminalreporter.write_line(f"criterion {int(number):2d} {_CRITERIA[name]}  {label.replace('_', ' ')}")
