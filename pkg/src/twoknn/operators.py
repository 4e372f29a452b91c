"""Conceptually correct kNN operators and plans.

These are the reference plans every optimized algorithm is checked against.
``invalid_inner_pushdown`` is deliberately wrong and kept as a negative
control.  Result sets hold id tuples: ``(outer_id, inner_id)`` for pairs and
``(a_id, b_id, c_id)`` for triplets.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from collections.abc import Iterable

from .geometry import Point
from .grid import GridIndex
from .knn import Neighborhood, get_knn, knn_positions

Pair = tuple[int, int]
Triplet = tuple[int, int, int]
PairSet = set[Pair]
TripletSet = set[Triplet]


def _check_k(*ks: int) -> None:
    for k in ks:
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")


def knn_select(index: GridIndex, relation: str, focal: Point, k: int) -> Neighborhood:
    _check_k(k)
    return get_knn(index, relation, focal, k)


def knn_join(
    index: GridIndex,
    outer: str,
    inner: str,
    k: int,
    outer_points: Iterable[Point] | None = None,
    stats: Counter | None = None,
) -> PairSet:
    """All ``(e1, e2)`` with ``e2`` among the ``k`` nearest inner points of ``e1``.

    ``outer_points`` restricts the outer iteration (outer-side selection);
    the inner side always sees the whole relation.
    """
    _check_k(k)
    stats = stats if stats is not None else Counter()
    store = index.relation(inner)
    if outer_points is None:
        outer_points = index.relation(outer).points
    pairs: PairSet = set()
    if len(store) == 0:
        return pairs
    geometry = index.geometry
    for p in outer_points:
        pos, _ = knn_positions(store, geometry, p.x, p.y, k)
        stats["knn"] += 1
        pid = p.id
        pairs.update((pid, i) for i in store.ids_at(pos))
    return pairs


def intersect_pairs_on_inner(ab: Iterable[Pair], cb: Iterable[Pair]) -> TripletSet:
    """Match ``(a, b)`` with ``(c, b)`` on the shared inner key ``b``."""
    by_b: dict[int, list[int]] = defaultdict(list)
    for c, b in cb:
        by_b[b].append(c)
    return {(a, b, c) for a, b in ab for c in by_b.get(b, ())}


def baseline_select_join_inner(
    index: GridIndex,
    outer: str,
    inner: str,
    k_join: int,
    k_select: int,
    focal: Point,
    stats: Counter | None = None,
) -> PairSet:
    """Join first, then keep the pairs whose inner point survives the select."""
    _check_k(k_join, k_select)
    selected = knn_select(index, inner, focal, k_select).ids
    joined = knn_join(index, outer, inner, k_join, stats=stats)
    return {pair for pair in joined if pair[1] in selected}


def baseline_select_join_outer(
    index: GridIndex,
    outer: str,
    inner: str,
    k_join: int,
    k_select: int,
    focal: Point,
    stats: Counter | None = None,
) -> PairSet:
    """Join first, then keep the pairs whose outer point survives the select."""
    _check_k(k_join, k_select)
    selected = knn_select(index, outer, focal, k_select).ids
    joined = knn_join(index, outer, inner, k_join, stats=stats)
    return {pair for pair in joined if pair[0] in selected}


def invalid_inner_pushdown(
    index: GridIndex,
    outer: str,
    inner: str,
    k_join: int,
    k_select: int,
    focal: Point,
    stats: Counter | None = None,
) -> PairSet:
    """Negative control: joins the outer relation against the selected inner
    points only.  Produces wrong answers whenever the select is selective."""
    _check_k(k_join, k_select)
    selected = knn_select(index, inner, focal, k_select)
    pushed = GridIndex.build(
        index.geometry,
        [(outer, index.relation(outer).points), ("__selected__", selected.points)],
    )
    return knn_join(pushed, outer, "__selected__", k_join, stats=stats)
