"""Queries with two kNN-joins.

Unchained joins ``(A join B)`` and ``(C join B)`` share the inner relation B and
must be evaluated independently, then matched on B.  Chained joins
``(A join B)`` and ``(B join C)`` may be nested, since the first join acts as a
selection on the outer side of the second.
"""

from __future__ import annotations

import enum
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from .grid import GridIndex
from .knn import get_knn, knn_positions
from .operators import TripletSet, intersect_pairs_on_inner, knn_join


@dataclass(frozen=True)
class UnchainedQuery:
    """Triplets ``(a, b, c)``: b is a k_ab-NN of a and a k_cb-NN of c."""

    a: str
    b: str
    c: str
    k_ab: int
    k_cb: int

    def __post_init__(self) -> None:
        if self.k_ab < 1 or self.k_cb < 1:
            raise ValueError("k_ab and k_cb must be >= 1")


@dataclass(frozen=True)
class ChainedQuery:
    """Triplets ``(a, b, c)``: b is a k_ab-NN of a and c is a k_bc-NN of b."""

    a: str
    b: str
    c: str
    k_ab: int
    k_bc: int

    def __post_init__(self) -> None:
        if self.k_ab < 1 or self.k_bc < 1:
            raise ValueError("k_ab and k_bc must be >= 1")


class JoinOrder(str, enum.Enum):
    AB = "ab"
    CB = "cb"
    INDEPENDENT = "independent"


class SafetyMark(enum.Enum):
    CANDIDATE = "candidate"
    SAFE = "safe"


def unchained_baseline(index: GridIndex, q: UnchainedQuery, stats: Counter | None = None) -> TripletSet:
    ab = knn_join(index, q.a, q.b, q.k_ab, stats=stats)
    cb = knn_join(index, q.c, q.b, q.k_cb, stats=stats)
    return intersect_pairs_on_inner(ab, cb)


def _orient(q: UnchainedQuery, first: JoinOrder | str) -> tuple[str, int, str, int]:
    first = JoinOrder(first)
    if first is JoinOrder.AB:
        return q.a, q.k_ab, q.c, q.k_cb
    if first is JoinOrder.CB:
        return q.c, q.k_cb, q.a, q.k_ab
    raise ValueError("first must be 'ab' or 'cb'")


def candidate_blocks(index: GridIndex, inner: str, pairs: set[tuple[int, int]]) -> np.ndarray:
    """Boolean mask over blocks: True where a block holds an inner point that
    appears in ``pairs`` (Candidate), False elsewhere (Safe)."""
    store = index.relation(inner)
    used = np.isin(store.ids, np.fromiter((b for _, b in pairs), dtype=np.int64, count=len(pairs)))
    mask = np.zeros(index.geometry.n_blocks, dtype=bool)
    mask[store.blocks[used]] = True
    return mask


def safety_marks(candidate: np.ndarray) -> dict[int, SafetyMark]:
    return {b: SafetyMark.CANDIDATE if c else SafetyMark.SAFE for b, c in enumerate(candidate.tolist())}


def unchained_contributing_blocks(
    index: GridIndex,
    inner: str,
    second_outer: str,
    k_second: int,
    candidate: np.ndarray,
    stats: Counter | None = None,
) -> list[int]:
    """Blocks of the second join's outer relation that may contribute.

    A Safe block is Non-Contributing when every block intersecting the disc of
    radius ``r + diagonal`` about its center is Safe, ``r`` being the distance
    from the center to its farthest ``k_second`` inner neighbor.  Candidate
    blocks are Contributing outright.  Empty blocks hold nothing to join and
    are not examined.
    """
    stats = stats if stats is not None else Counter()
    geo = index.geometry
    diag = geo.block_diagonal
    s = min(geo.cell_width, geo.cell_height)
    contributing: list[int] = []
    for block in index.relation(second_outer).nonempty_blocks():
        if candidate[block]:
            contributing.append(block)
            continue
        center = geo.block_center(block)
        nbr = get_knn(index, inner, center, k_second)
        stats["center_knn"] += 1
        threshold = nbr.farthest_distance + diag
        row, col, _ = geo.home(center.x, center.y)
        win = geo.window(row, col, int(threshold // s) + 1)
        near = geo.window_mindists(center.x, center.y, *win[:4]) <= threshold
        if candidate[geo.window_ids(*win[:4])[near]].any():
            contributing.append(block)
        else:
            stats["noncontributing_blocks"] += 1
    return contributing


def unchained_block_marking(
    index: GridIndex,
    q: UnchainedQuery,
    first: JoinOrder | str = JoinOrder.AB,
    stats: Counter | None = None,
) -> TripletSet:
    """Run one join in full, mark the inner blocks its output touches as
    Candidate, and join only the Contributing blocks of the other outer
    relation."""
    stats = stats if stats is not None else Counter()
    first_outer, k_first, second_outer, k_second = _orient(q, first)
    pairs = knn_join(index, first_outer, q.b, k_first, stats=stats)
    triplets: TripletSet = set()
    if not pairs:
        return triplets
    candidate = candidate_blocks(index, q.b, pairs)
    contributing = unchained_contributing_blocks(index, q.b, second_outer, k_second, candidate, stats)
    by_b: dict[int, list[int]] = defaultdict(list)
    for o, b in pairs:
        by_b[b].append(o)
    inner = index.relation(q.b)
    outer = index.relation(second_outer)
    geo = index.geometry
    a_first = JoinOrder(first) is JoinOrder.AB
    for block in contributing:
        for p in outer.bucket(block):
            pos, _ = knn_positions(inner, geo, p.x, p.y, k_second)
            stats["knn"] += 1
            for b in inner.ids_at(pos):
                for o in by_b.get(b, ()):
                    triplets.add((o, b, p.id) if a_first else (p.id, b, o))
    return triplets


def unchained_filtered(
    index: GridIndex, q: UnchainedQuery, first: JoinOrder | str = JoinOrder.AB, stats: Counter | None = None
) -> TripletSet:
    """Negative control: the second join only sees the inner points the first
    join produced.  Equivalent to pushing a selection below the inner side of
    a kNN-join, hence wrong in general."""
    first_outer, k_first, second_outer, k_second = _orient(q, first)
    pairs = knn_join(index, first_outer, q.b, k_first, stats=stats)
    used = {b for _, b in pairs}
    survivors = [p for p in index.relation(q.b).points if p.id in used]
    filtered = GridIndex.build(
        index.geometry,
        [(second_outer, index.relation(second_outer).points), ("__filtered__", survivors)],
    )
    second = knn_join(filtered, second_outer, "__filtered__", k_second, stats=stats)
    if JoinOrder(first) is JoinOrder.AB:
        return intersect_pairs_on_inner(pairs, second)
    return intersect_pairs_on_inner(second, pairs)


def coverage(index: GridIndex, relation: str) -> float:
    """Fraction of grid blocks holding at least one point of ``relation``."""
    counts = index.relation(relation).counts
    return float(np.count_nonzero(counts)) / len(counts)


def advise_join_order(index: GridIndex, q: UnchainedQuery, ratio: float = 1.1) -> JoinOrder:
    """Start with the join whose outer relation covers fewer blocks; when the
    two coverages are within ``ratio`` of each other, prefer independent
    evaluation since marking would prune nothing."""
    cov_a = coverage(index, q.a)
    cov_c = coverage(index, q.c)
    lo, hi = sorted((cov_a, cov_c))
    if hi <= lo * ratio:
        return JoinOrder.INDEPENDENT
    return JoinOrder.AB if cov_a < cov_c else JoinOrder.CB


# -- chained ---------------------------------------------------------------


def chained_right_deep(index: GridIndex, q: ChainedQuery, stats: Counter | None = None) -> TripletSet:
    """QEP1: materialize ``B join C`` in full, then probe it per ``(a, b)``."""
    stats = stats if stats is not None else Counter()
    geo = index.geometry
    b_store = index.relation(q.b)
    c_store = index.relation(q.c)
    materialized: dict[int, list[int]] = {}
    for p in b_store.points:
        pos, _ = knn_positions(c_store, geo, p.x, p.y, q.k_bc)
        stats["c_knn"] += 1
        materialized[p.id] = c_store.ids_at(pos)
    triplets: TripletSet = set()
    if len(b_store) == 0:
        return triplets
    for a in index.relation(q.a).points:
        pos, _ = knn_positions(b_store, geo, a.x, a.y, q.k_ab)
        stats["knn"] += 1
        for b in b_store.ids_at(pos):
            triplets.update((a.id, b, c) for c in materialized[b])
    return triplets


def chained_join_intersection(index: GridIndex, q: ChainedQuery, stats: Counter | None = None) -> TripletSet:
    """QEP2: both joins in full, matched on b (inner of the first join, outer
    of the second)."""
    stats = stats if stats is not None else Counter()
    ab = knn_join(index, q.a, q.b, q.k_ab, stats=stats)
    c_stats: Counter = Counter()
    bc = knn_join(index, q.b, q.c, q.k_bc, stats=c_stats)
    stats["c_knn"] += c_stats["knn"]
    by_b: dict[int, list[int]] = defaultdict(list)
    for b, c in bc:
        by_b[b].append(c)
    return {(a, b, c) for a, b in ab for c in by_b.get(b, ())}


def chained_nested_join(
    index: GridIndex, q: ChainedQuery, caching: bool = True, stats: Counter | None = None
) -> TripletSet:
    """QEP3: a b's neighborhood in C is computed only when b is a neighbor of
    some a.  With ``caching`` it is computed at most once per distinct b."""
    stats = stats if stats is not None else Counter()
    geo = index.geometry
    b_store = index.relation(q.b)
    c_store = index.relation(q.c)
    cache: dict[int, list[int]] = {}
    triplets: TripletSet = set()
    if len(b_store) == 0:
        return triplets
    b_ids, b_xs, b_ys = b_store.id_list, b_store.x_list, b_store.y_list
    for a in index.relation(q.a).points:
        pos, _ = knn_positions(b_store, geo, a.x, a.y, q.k_ab)
        stats["knn"] += 1
        for i in pos:
            b = b_ids[i]
            cs = cache.get(b) if caching else None
            if cs is None:
                cpos, _ = knn_positions(c_store, geo, b_xs[i], b_ys[i], q.k_bc)
                stats["c_knn"] += 1
                cs = c_store.ids_at(cpos)
                if caching:
                    cache[b] = cs
            else:
                stats["cache_hits"] += 1
            triplets.update((a.id, b, c) for c in cs)
    return triplets
