"""Two kNN-select predicates on one relation.

The correct answer is the intersection of the two independently computed
neighborhoods.  When the k values differ, the larger neighborhood only has
to be exact on the members of the smaller one, so its locality can be cut
down to the blocks within reach of those members.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .geometry import Point, dist
from .grid import GridIndex, RelationStore
from .knn import blocks_within, get_knn, intersect, select_positions, watermark


@dataclass(frozen=True)
class TwoSelectQuery:
    relation: str
    f1: Point
    k1: int
    f2: Point
    k2: int

    def __post_init__(self) -> None:
        if self.k1 < 1 or self.k2 < 1:
            raise ValueError("k1 and k2 must be >= 1")

    def normalized(self) -> TwoSelectQuery:
        """Same query with ``k1 <= k2``."""
        if self.k1 > self.k2:
            return TwoSelectQuery(self.relation, self.f2, self.k2, self.f1, self.k1)
        return self


def baseline_two_select(index: GridIndex, q: TwoSelectQuery, stats: Counter | None = None) -> list[Point]:
    stats = stats if stats is not None else Counter()
    nbr1 = get_knn(index, q.relation, q.f1, q.k1)
    nbr2 = get_knn(index, q.relation, q.f2, q.k2)
    stats["knn"] += 2
    return intersect(nbr1, nbr2)


def truncated_locality(
    store: RelationStore, index: GridIndex, f2: Point, k2: int, threshold: float
) -> np.ndarray:
    """Locality of ``f2`` restricted to blocks with MINDIST <= ``threshold``.

    The MAXDIST phase still runs until ``k2`` points are counted (counting
    every scanned block, added or not) and fixes the watermark; the MINDIST
    phase stops at whichever of the watermark and ``threshold`` comes first.
    Both phases together keep exactly the blocks with
    ``MINDIST <= min(watermark, threshold)``.
    """
    geo = index.geometry
    near = blocks_within(geo, f2.x, f2.y, threshold)
    # Blocks with MAXDIST <= threshold are among those with MINDIST <= threshold.
    # If the latter hold fewer than k2 points the MAXDIST scan must pass the
    # threshold before counting k2, so the threshold is the tighter bound and
    # the scan can be skipped.
    if int(store.counts[near].sum()) < k2:
        return near[store.counts[near] > 0] if len(store) < k2 else near
    m = watermark(store, geo, f2.x, f2.y, k2)
    return blocks_within(geo, f2.x, f2.y, min(m, threshold))


def two_knn_select(index: GridIndex, q: TwoSelectQuery, stats: Counter | None = None) -> list[Point]:
    """Evaluate the smaller-k select exactly, then compute the other
    neighborhood from a locality truncated at the search threshold: the
    distance from ``f2`` to the farthest (from ``f2``) member of the first
    neighborhood."""
    stats = stats if stats is not None else Counter()
    q = q.normalized()
    nbr1 = get_knn(index, q.relation, q.f1, q.k1)
    stats["knn"] += 1
    if not nbr1:
        return []
    threshold = max(dist(q.f2, p) for p in nbr1.points)
    store = index.relation(q.relation)
    blocks = truncated_locality(store, index, q.f2, q.k2, threshold)
    stats["locality_blocks"] += len(blocks)
    pos, _ = select_positions(store, blocks, q.f2.x, q.f2.y, q.k2)
    nbr2_ids = set(store.ids_at(pos))
    return sorted((p for p in nbr1.points if p.id in nbr2_ids), key=lambda p: p.id)


def sequential_two_select(index: GridIndex, q: TwoSelectQuery, stats: Counter | None = None) -> list[Point]:
    """Negative control: the second select only sees the first one's output."""
    stats = stats if stats is not None else Counter()
    nbr1 = get_knn(index, q.relation, q.f1, q.k1)
    stats["knn"] += 1
    ranked = sorted(nbr1.points, key=lambda p: (dist(q.f2, p), p.id))[: q.k2]
    return sorted(ranked, key=lambda p: p.id)
