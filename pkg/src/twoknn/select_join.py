"""kNN-select on the inner relation of a kNN-join: Counting and Block-Marking.

Both algorithms answer ``(E1 join_kNN E2) ∩ (E1 × select_{k_select, f}(E2))``
without pushing the select below the join.  They compute the focal point's
neighborhood first and skip outer points (Counting) or whole outer blocks
(Block-Marking) whose neighborhoods provably miss it.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .geometry import Point, dist, maxdist
from .grid import GridIndex, ordered_blocks
from .knn import Neighborhood, get_knn, knn_positions
from .operators import PairSet, knn_join, knn_select


@dataclass(frozen=True)
class SelectJoinQuery:
    outer: str
    inner: str
    k_join: int
    k_select: int
    focal: Point

    def __post_init__(self) -> None:
        if self.k_join < 1 or self.k_select < 1:
            raise ValueError("k_join and k_select must be >= 1")


class BlockMark(enum.Enum):
    CONTRIBUTING = "contributing"
    NON_CONTRIBUTING = "non-contributing"


def _thresholds(xs: np.ndarray, ys: np.ndarray, nbr: Neighborhood) -> np.ndarray:
    """Distance from every outer point to its nearest member of ``nbr``."""
    mx = np.array([p.x for p in nbr.points])
    my = np.array([p.y for p in nbr.points])
    out = np.full(len(xs), np.inf)
    for x, y in zip(mx.tolist(), my.tolist()):
        dx = xs - x
        dy = ys - y
        np.minimum(out, np.sqrt(dx * dx + dy * dy), out=out)
    return out


def _settled_by_neighbor_cells(index: GridIndex, q: SelectJoinQuery, thresholds: np.ndarray) -> np.ndarray:
    """Outer points already known to have more than ``k_join`` inner points in
    blocks fully inside their search threshold.

    Only the 3x3 cells around each point's own block are summed.  That is a
    lower bound on the count the MAXDIST scan accumulates (the scan visits
    every block with MAXDIST < threshold), so a point flagged here is one the
    scan would skip too.
    """
    geo = index.geometry
    g = geo.resolution
    outer = index.relation(q.outer)
    inner_counts = index.relation(q.inner).counts
    xs, ys = outer.xs, outer.ys
    rows, cols = np.divmod(outer.blocks, g)
    xe, ye = geo.x_edges, geo.y_edges
    total = np.zeros(len(xs), dtype=np.int64)
    for dr in (-1, 0, 1):
        r = rows + dr
        r_ok = (r >= 0) & (r < g)
        rc = np.clip(r, 0, g - 1)
        dy = np.maximum(np.abs(ye[rc] - ys), np.abs(ye[rc + 1] - ys))
        for dc in (-1, 0, 1):
            c = cols + dc
            ok = r_ok & (c >= 0) & (c < g)
            cc = np.clip(c, 0, g - 1)
            dx = np.maximum(np.abs(xe[cc] - xs), np.abs(xe[cc + 1] - xs))
            inside = ok & (np.sqrt(dy * dy + dx * dx) < thresholds)
            total += np.where(inside, inner_counts[rc * g + cc], 0)
    return total > q.k_join


def counting_select_join(index: GridIndex, q: SelectJoinQuery, stats: Counter | None = None) -> PairSet:
    """Counting: per outer point, count inner points in blocks completely
    inside the search threshold; more than ``k_join`` means the point's
    neighborhood cannot reach the focal neighborhood."""
    stats = stats if stats is not None else Counter()
    nbr_f = get_knn(index, q.inner, q.focal, q.k_select)
    pairs: PairSet = set()
    if not nbr_f:
        return pairs
    outer = index.relation(q.outer)
    inner = index.relation(q.inner)
    geo = index.geometry
    thresholds = _thresholds(outer.xs, outer.ys, nbr_f)
    settled = _settled_by_neighbor_cells(index, q, thresholds)
    stats["threshold_scans"] += len(outer)
    stats["skipped_points"] += int(settled.sum())
    counts = inner.counts.tolist()
    selected = nbr_f.ids
    k = q.k_join
    for i in np.flatnonzero(~settled).tolist():
        x = float(outer.xs[i])
        y = float(outer.ys[i])
        threshold = float(thresholds[i])
        count = 0
        for block, md in ordered_blocks(geo, x, y, "max"):
            # strict: a point exactly on the threshold may tie a focal neighbor
            if md >= threshold:
                break
            count += counts[block]
            if count > k:
                break
        if count > k:
            stats["skipped_points"] += 1
            continue
        pos, _ = knn_positions(inner, geo, x, y, k)
        stats["knn"] += 1
        pid = int(outer.ids[i])
        pairs.update((pid, j) for j in inner.ids_at(pos) if j in selected)
    return pairs


def is_noncontributing(
    index: GridIndex,
    q: SelectJoinQuery,
    block: int,
    f_farthest: float,
    stats: Counter | None = None,
    diagonal_factor: float = 1.0,
) -> bool:
    """``r + d + f_farthest < f_center`` for the block's center.

    ``r`` is the distance from the center to the farthest of its ``k_join``
    inner neighbors.  ``diagonal_factor`` scales ``d`` and exists only to
    demonstrate that the full diagonal is needed.
    """
    geo = index.geometry
    center = geo.block_center(block)
    nbr = get_knn(index, q.inner, center, q.k_join)
    if stats is not None:
        stats["center_knn"] += 1
    d = geo.block_diagonal * diagonal_factor
    return nbr.farthest_distance + d + f_farthest < dist(center, q.focal)


def block_marking_preprocess(
    index: GridIndex,
    q: SelectJoinQuery,
    nbr_f: Neighborhood,
    stats: Counter | None = None,
) -> list[int]:
    """Contributing outer blocks, found by scanning in MINDIST order from the
    focal point.

    The first Non-Contributing block of a run records ``M`` = its MAXDIST from
    the focal point; a run reaching a block with MINDIST >= M closes a contour
    and everything not yet scanned is Non-Contributing.
    """
    stats = stats if stats is not None else Counter()
    geo = index.geometry
    f = q.focal
    f_farthest = nbr_f.farthest_distance
    contributing: list[int] = []
    m = 0.0
    scanned = 0
    for block, block_mindist in ordered_blocks(geo, f.x, f.y, "min"):
        # m == 0 means no Non-Contributing run is open
        if m > 0.0 and block_mindist >= m:
            break
        scanned += 1
        if is_noncontributing(index, q, block, f_farthest, stats):
            if m == 0.0:
                m = maxdist(f, geo.block_rect(block))
        else:
            contributing.append(block)
            m = 0.0
    stats["scanned_blocks"] += scanned
    stats["noncontributing_blocks"] += geo.n_blocks - len(contributing)
    return contributing


def block_marks(index: GridIndex, contributing: list[int]) -> dict[int, BlockMark]:
    marks = dict.fromkeys(range(index.geometry.n_blocks), BlockMark.NON_CONTRIBUTING)
    for b in contributing:
        marks[b] = BlockMark.CONTRIBUTING
    return marks


def block_marking_select_join(index: GridIndex, q: SelectJoinQuery, stats: Counter | None = None) -> PairSet:
    """Block-Marking: join only the outer points of Contributing blocks."""
    stats = stats if stats is not None else Counter()
    nbr_f = get_knn(index, q.inner, q.focal, q.k_select)
    pairs: PairSet = set()
    if not nbr_f:
        return pairs
    contributing = block_marking_preprocess(index, q, nbr_f, stats)
    outer = index.relation(q.outer)
    inner = index.relation(q.inner)
    geo = index.geometry
    selected = nbr_f.ids
    for block in contributing:
        for p in outer.bucket(block):
            pos, _ = knn_positions(inner, geo, p.x, p.y, q.k_join)
            stats["knn"] += 1
            pairs.update((p.id, j) for j in inner.ids_at(pos) if j in selected)
    return pairs


def outer_pushdown_select_join(index: GridIndex, q: SelectJoinQuery, stats: Counter | None = None) -> PairSet:
    """Select on the OUTER relation pushed below the join (a valid rewrite)."""
    selected = knn_select(index, q.outer, q.focal, q.k_select)
    return knn_join(index, q.outer, q.inner, q.k_join, outer_points=selected.points, stats=stats)


def noncontributing_points(index: GridIndex, q: SelectJoinQuery, contributing: list[int]) -> list[Point]:
    """Outer points that Block-Marking never joins."""
    keep = set(contributing)
    outer = index.relation(q.outer)
    return [p for b in outer.nonempty_blocks() if b not in keep for p in outer.bucket(b)]

