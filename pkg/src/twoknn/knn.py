"""Neighborhoods via the locality algorithm.

A locality is built in two phases: blocks are taken in MAXDIST order from
the focal point until they hold at least ``k`` points, which fixes the
watermark ``M`` (the MAXDIST of the last block taken); then every block whose
MINDIST is at most ``M`` joins.  Because every prefix block already has
``MINDIST <= MAXDIST <= M``, the locality is exactly ``{b : MINDIST(b) <= M}``.
The neighborhood is then selected from the locality's buckets only.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from itertools import chain
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import Point, dist
from .grid import GridGeometry, GridIndex, RelationStore


@dataclass(frozen=True)
class Neighborhood:
    """The ``k`` nearest points to ``focal``, sorted by ``(distance, id)``."""

    focal: Point
    k: int
    points: list[Point]
    distances: list[float]

    @property
    def members(self) -> list[tuple[Point, float]]:
        return list(zip(self.points, self.distances))

    @cached_property
    def ids(self) -> frozenset[int]:
        return frozenset(p.id for p in self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __bool__(self) -> bool:
        return bool(self.points)

    @property
    def farthest_distance(self) -> float:
        return self.distances[-1]

    def nearest_to(self, p: Point) -> Point:
        return min(self.points, key=lambda q: dist(p, q))

    def farthest_to(self, p: Point) -> Point:
        return max(self.points, key=lambda q: dist(p, q))


@dataclass(frozen=True)
class Locality:
    blocks: list[int]
    watermark: float


# Small queries are dominated by per-call array overhead, so small windows
# and candidate sets are handled with plain floats.  Both paths evaluate the
# same expressions in the same order and agree bit for bit.
_SCALAR_MAX_CELLS = 441
_SCALAR_MAX_POINTS = 160
_SCALAR_MAX_ROWS = 20


def _initial_window(store: RelationStore, geometry: GridGeometry, k: int) -> int:
    density = max(len(store), 1) / geometry.n_blocks
    return max(1, math.ceil(0.5 * math.sqrt(k / density)))


def _watermark_at(
    store: RelationStore, geometry: GridGeometry, fx: float, fy: float, k: int, row: int, col: int, delta: float
) -> float:
    """Watermark of a relation holding at least ``k`` points.

    The smallest window around the home cell holding ``k`` points is found
    from the count table.  Its own MAXDIST-ordered prefix gives an upper bound
    on the watermark, exact when no cell outside the window can have a smaller
    MAXDIST; otherwise one wider window, sized by that bound, settles it.
    """
    lo, w = 0, _initial_window(store, geometry, k)
    while True:
        r_lo, r_hi, c_lo, c_hi, covers_all = geometry.window(row, col, w)
        if covers_all or store.window_count(r_lo, r_hi, c_lo, c_hi) >= k:
            break
        lo, w = w, 2 * w
    while w - lo > 1:
        mid = (lo + w) // 2
        if store.window_count(*geometry.window(row, col, mid)[:4]) >= k:
            w = mid
        else:
            lo = mid
    r_lo, r_hi, c_lo, c_hi, covers_all = geometry.window(row, col, w)
    m = _watermark_in(store, geometry, fx, fy, k, (r_lo, r_hi, c_lo, c_hi))
    if covers_all or m < geometry.ring_bound(w + 1, delta, "max"):
        return m
    # small slack so rounding in the ring bound can never cut a tied cell
    u = m + 1e-9 * (m + geometry.block_diagonal)
    s = min(geometry.cell_width, geometry.cell_height)
    w = max(w + 1, int((u + delta) // s))
    while w < geometry.resolution and geometry.ring_bound(w + 1, delta, "max") <= u:
        w += 1
    return _watermark_in(store, geometry, fx, fy, k, geometry.window(row, col, w)[:4])


def _watermark_in(
    store: RelationStore, geometry: GridGeometry, fx: float, fy: float, k: int, win: tuple[int, int, int, int]
) -> float:
    r_lo, r_hi, c_lo, c_hi = win
    if (r_hi - r_lo) * (c_hi - c_lo) <= _SCALAR_MAX_CELLS:
        xl, yl, g, counts = geometry._xl, geometry._yl, geometry.resolution, store._counts
        dx2 = []
        for c in range(c_lo, c_hi):
            dx = max(abs(xl[c] - fx), abs(xl[c + 1] - fx))
            dx2.append(dx * dx)
        cells = []
        for r in range(r_lo, r_hi):
            dy = max(abs(yl[r] - fy), abs(yl[r + 1] - fy))
            dy2 = dy * dy
            for c, n in enumerate(counts[r * g + c_lo : r * g + c_hi]):
                if n:
                    cells.append((math.sqrt(dy2 + dx2[c]), n))
        cells.sort()
        total = 0
        for m, n in cells:
            total += n
            if total >= k:
                return m
        raise AssertionError("watermark window holds fewer than k points")
    ids = geometry.window_ids(r_lo, r_hi, c_lo, c_hi)
    maxd = geometry.window_maxdists(fx, fy, r_lo, r_hi, c_lo, c_hi)
    order = np.argsort(maxd, kind="stable")
    cum = np.cumsum(store.counts[ids[order]])
    return float(maxd[order[int(np.searchsorted(cum, k))]])


def watermark(store: RelationStore, geometry: GridGeometry, fx: float, fy: float, k: int) -> float:
    """MAXDIST of the block at which the MAXDIST-ordered scan from ``(fx, fy)``
    has counted at least ``k`` points (``inf`` if the relation is smaller)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(store) < k:
        return math.inf
    return _watermark_at(store, geometry, fx, fy, k, *geometry.home(fx, fy))


def blocks_within(geometry: GridGeometry, fx: float, fy: float, bound: float) -> np.ndarray:
    """Ascending ids of all blocks with MINDIST <= ``bound``."""
    row, col, delta = geometry.home(fx, fy)
    s = min(geometry.cell_width, geometry.cell_height)
    # ring w + 1 starts beyond w * s - delta > bound
    w = min(int((bound + delta) // s) + 1, geometry.resolution)
    win = geometry.window(row, col, w)
    mind = geometry.window_mindists(fx, fy, *win[:4])
    return geometry.window_ids(*win[:4])[mind <= bound]


def locality_blocks(
    store: RelationStore, geometry: GridGeometry, fx: float, fy: float, k: int
) -> tuple[np.ndarray, float]:
    """Locality of ``(fx, fy)`` as ``(ascending block ids, watermark M)``.

    ``M`` is ``inf`` when the relation holds fewer than ``k`` points; the
    locality is then every non-empty block.
    """
    m = watermark(store, geometry, fx, fy, k)
    if math.isinf(m):
        return np.flatnonzero(store.counts), m
    return blocks_within(geometry, fx, fy, m), m


def _runs(store: RelationStore, blocks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Storage ranges ``[lo, hi)`` covering ascending ``blocks``; consecutive
    block ids are adjacent in storage and share one range."""
    if len(blocks) == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    cut = np.flatnonzero(np.diff(blocks) != 1)
    first = blocks[np.concatenate(([0], cut + 1))]
    last = blocks[np.concatenate((cut, [len(blocks) - 1]))]
    return store.starts[first], store.starts[last + 1]


def _select_runs(
    store: RelationStore, lo: np.ndarray, hi: np.ndarray, fx: float, fy: float, k: int
) -> tuple[np.ndarray, np.ndarray]:
    lengths = hi - lo
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    if len(lo) == 1:
        pos = np.arange(lo[0], hi[0])
    else:
        pos = np.repeat(lo - (np.cumsum(lengths) - lengths), lengths) + np.arange(total)
    dx = store.xs[pos] - fx
    dy = store.ys[pos] - fy
    d = np.sqrt(dx * dx + dy * dy)
    if total > k:
        kth = np.partition(d, k - 1)[k - 1]
        keep = d <= kth
        pos, d = pos[keep], d[keep]
    order = np.lexsort((store.ids[pos], d))[:k]
    return pos[order], d[order]


def select_from_blocks(
    store: RelationStore, blocks: np.ndarray, fx: float, fy: float, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Storage positions and distances of the ``k`` best points in ``blocks``
    (ascending ids), ordered by ``(distance, id)``."""
    lo, hi = _runs(store, np.asarray(blocks, dtype=np.int64))
    return _select_runs(store, lo, hi, fx, fy, k)


def build_locality(index: GridIndex, relation: str, focal: Point, k: int) -> Locality:
    store = index.relation(relation)
    blocks, m = locality_blocks(store, index.geometry, focal.x, focal.y, k)
    return Locality(blocks.tolist(), m)


def _scalar_runs(
    store: RelationStore, geometry: GridGeometry, fx: float, fy: float, bound: float
) -> list[tuple[int, int]] | None:
    """Storage ranges covering every block with MINDIST <= ``bound``, one per
    grid row, or None when the disc spans too many rows for the scalar path.

    Each row's columns come from the chord of the disc through that row,
    padded so rounding can only add blocks; a superset of the locality
    selects the same neighbors.
    """
    xl, yl, g, starts = geometry._xl, geometry._yl, geometry.resolution, store._starts
    b = bound + 1e-9 * (bound + geometry.block_diagonal) + 1e-12 * (abs(fx) + abs(fy))
    r_lo = max(bisect_left(yl, fy - b) - 1, 0)
    r_hi = min(bisect_right(yl, fy + b), g)
    if r_hi - r_lo > _SCALAR_MAX_ROWS:
        return None
    b2 = b * b
    runs = []
    for r in range(r_lo, r_hi):
        dy = max(yl[r] - fy, 0.0, fy - yl[r + 1])
        h2 = b2 - dy * dy
        if h2 < 0.0:
            continue
        h = math.sqrt(h2)
        c_lo = max(bisect_left(xl, fx - h) - 1, 0)
        c_hi = min(bisect_right(xl, fx + h), g)
        if c_lo < c_hi:
            runs.append((starts[r * g + c_lo], starts[r * g + c_hi]))
    return runs


def _scalar_select(
    store: RelationStore, runs: list[tuple[int, int]], fx: float, fy: float, k: int
) -> tuple[list[int], list[float]]:
    xs, ys, ids = store.x_list, store.y_list, store.id_list
    sqrt = math.sqrt
    ds: list[float] = []
    for lo, hi in runs:
        ds += [sqrt((x - fx) * (x - fx) + (y - fy) * (y - fy)) for x, y in zip(xs[lo:hi], ys[lo:hi])]
    positions = chain.from_iterable(range(lo, hi) for lo, hi in runs)
    if len(ds) > k:
        kth = sorted(ds)[k - 1]
        cand = [(d, ids[i], i) for d, i in zip(ds, positions) if d <= kth]
    else:
        cand = [(d, ids[i], i) for d, i in zip(ds, positions)]
    # ids are unique, so positions never take part in the comparison
    cand.sort()
    del cand[k:]
    return [c[2] for c in cand], [c[0] for c in cand]


def _select_ranges(
    store: RelationStore, runs: list[tuple[int, int]], fx: float, fy: float, k: int
) -> tuple[list[int], list[float]]:
    if sum(hi - lo for lo, hi in runs) <= _SCALAR_MAX_POINTS:
        return _scalar_select(store, runs, fx, fy, k)
    lo = np.fromiter((r[0] for r in runs), dtype=np.int64, count=len(runs))
    hi = np.fromiter((r[1] for r in runs), dtype=np.int64, count=len(runs))
    pos, d = _select_runs(store, lo, hi, fx, fy, k)
    return pos.tolist(), d.tolist()


def select_positions(
    store: RelationStore, blocks: list[int] | np.ndarray, fx: float, fy: float, k: int
) -> tuple[list[int], list[float]]:
    """``select_from_blocks`` with plain lists out, using whichever path is
    cheaper for the candidate count."""
    lo, hi = _runs(store, np.asarray(blocks, dtype=np.int64))
    return _select_ranges(store, list(zip(lo.tolist(), hi.tolist())), fx, fy, k)


def knn_positions(
    store: RelationStore, geometry: GridGeometry, fx: float, fy: float, k: int
) -> tuple[list[int], list[float]]:
    """Storage positions and distances of the ``k`` nearest points, best first."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(store) >= k:
        row, col, delta = geometry.home(fx, fy)
        m = _watermark_at(store, geometry, fx, fy, k, row, col, delta)
        runs = _scalar_runs(store, geometry, fx, fy, m)
        if runs is not None:
            return _select_ranges(store, runs, fx, fy, k)
        return select_positions(store, blocks_within(geometry, fx, fy, m), fx, fy, k)
    return select_positions(store, np.flatnonzero(store.counts), fx, fy, k)


def get_knn(index: GridIndex, relation: str, focal: Point, k: int) -> Neighborhood:
    store = index.relation(relation)
    if len(store) == 0:
        if k < 1:
            raise ValueError("k must be >= 1")
        return Neighborhood(focal, k, [], [])
    pos, d = knn_positions(store, index.geometry, focal.x, focal.y, k)
    pts = store.points
    return Neighborhood(focal, k, [pts[i] for i in pos], d)


def intersect(a: Neighborhood, b: Neighborhood) -> list[Point]:
    """Points (by id) present in both neighborhoods, sorted by id."""
    common = a.ids & b.ids
    return sorted((p for p in a.points if p.id in common), key=lambda p: p.id)
