"""Uniform grid index shared by every relation of a query.

Blocks are addressed by integer ids ``row * G + col`` where ``row`` indexes
the y axis and ``col`` the x axis.  Each relation keeps its points sorted by
block (a CSR layout: ``starts[b]:starts[b + 1]`` slices the block's points),
which makes per-block counts O(1) and locality gathers cheap.
"""

from __future__ import annotations

import bisect
import math
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

from .geometry import Point, Rect

DEFAULT_POINTS_PER_BLOCK = 4


class IndexBuildError(ValueError):
    pass


@dataclass(frozen=True)
class GridGeometry:
    extent: Rect
    resolution: int
    x_edges: np.ndarray = field(init=False, repr=False, compare=False)
    y_edges: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.resolution < 1:
            raise ValueError("grid resolution must be a positive integer")
        g = self.resolution
        e = self.extent
        if e.x_max <= e.x_min or e.y_max <= e.y_min:
            raise ValueError("grid extent must have positive area")
        xs = e.x_min + np.arange(g + 1) * ((e.x_max - e.x_min) / g)
        ys = e.y_min + np.arange(g + 1) * ((e.y_max - e.y_min) / g)
        # pin the far edges so the blocks tile the extent exactly
        xs[-1] = e.x_max
        ys[-1] = e.y_max
        xs.flags.writeable = False
        ys.flags.writeable = False
        object.__setattr__(self, "x_edges", xs)
        object.__setattr__(self, "y_edges", ys)
        object.__setattr__(self, "_xl", xs.tolist())
        object.__setattr__(self, "_yl", ys.tolist())

    @property
    def n_blocks(self) -> int:
        return self.resolution * self.resolution

    @property
    def cell_width(self) -> float:
        return (self.extent.x_max - self.extent.x_min) / self.resolution

    @property
    def cell_height(self) -> float:
        return (self.extent.y_max - self.extent.y_min) / self.resolution

    @property
    def block_diagonal(self) -> float:
        return math.hypot(self.cell_width, self.cell_height)

    def row_col(self, block: int) -> tuple[int, int]:
        return divmod(block, self.resolution)

    def block_id(self, row: int, col: int) -> int:
        return row * self.resolution + col

    def block_rect(self, block: int) -> Rect:
        row, col = divmod(block, self.resolution)
        return Rect(self._xl[col], self._yl[row], self._xl[col + 1], self._yl[row + 1])

    def block_center(self, block: int) -> Point:
        return self.block_rect(block).center

    def locate(self, p: Point) -> int:
        """Half-open cells; the last row/column is closed on its far edge."""
        e = self.extent
        if not (e.x_min <= p.x <= e.x_max and e.y_min <= p.y <= e.y_max):
            raise IndexBuildError(f"point {p} lies outside the grid extent {e}")
        g = self.resolution
        col = min(bisect.bisect_right(self._xl, p.x) - 1, g - 1)
        row = min(bisect.bisect_right(self._yl, p.y) - 1, g - 1)
        return row * g + col

    def locate_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        g = self.resolution
        cols = np.clip(np.searchsorted(self.x_edges, xs, side="right") - 1, 0, g - 1)
        rows = np.clip(np.searchsorted(self.y_edges, ys, side="right") - 1, 0, g - 1)
        return rows * g + cols

    # -- vectorized helpers over windows of cells ---------------------------

    def home(self, fx: float, fy: float) -> tuple[int, int, float]:
        """Cell nearest to ``(fx, fy)`` and the focal's distance to it."""
        g = self.resolution
        col = min(max(bisect.bisect_right(self._xl, fx) - 1, 0), g - 1)
        row = min(max(bisect.bisect_right(self._yl, fy) - 1, 0), g - 1)
        dx = max(self._xl[col] - fx, 0.0, fx - self._xl[col + 1])
        dy = max(self._yl[row] - fy, 0.0, fy - self._yl[row + 1])
        return row, col, math.sqrt(dx * dx + dy * dy)

    def window(self, row: int, col: int, w: int) -> tuple[int, int, int, int, bool]:
        """Row/column bounds ``[r_lo, r_hi) x [c_lo, c_hi)`` of the cells within
        Chebyshev distance ``w`` of ``(row, col)``, plus whether that is the
        whole grid."""
        g = self.resolution
        r_lo, r_hi = max(0, row - w), min(g, row + w + 1)
        c_lo, c_hi = max(0, col - w), min(g, col + w + 1)
        return r_lo, r_hi, c_lo, c_hi, (r_hi - r_lo == g and c_hi - c_lo == g)

    def window_ids(self, r_lo: int, r_hi: int, c_lo: int, c_hi: int) -> np.ndarray:
        g = self.resolution
        return (np.arange(r_lo * g, r_hi * g, g)[:, None] + np.arange(c_lo, c_hi)).ravel()

    def window_mindists(self, fx: float, fy: float, r_lo: int, r_hi: int, c_lo: int, c_hi: int) -> np.ndarray:
        """MINDIST from the focal to each window cell, row-major."""
        xe, ye = self.x_edges, self.y_edges
        dx = np.maximum(np.maximum(xe[c_lo:c_hi] - fx, 0.0), fx - xe[c_lo + 1 : c_hi + 1])
        dy = np.maximum(np.maximum(ye[r_lo:r_hi] - fy, 0.0), fy - ye[r_lo + 1 : r_hi + 1])
        return np.sqrt((dy * dy)[:, None] + dx * dx).ravel()

    def window_maxdists(self, fx: float, fy: float, r_lo: int, r_hi: int, c_lo: int, c_hi: int) -> np.ndarray:
        """MAXDIST from the focal to each window cell, row-major."""
        xe, ye = self.x_edges, self.y_edges
        dx = np.maximum(np.abs(xe[c_lo:c_hi] - fx), np.abs(xe[c_lo + 1 : c_hi + 1] - fx))
        dy = np.maximum(np.abs(ye[r_lo:r_hi] - fy), np.abs(ye[r_lo + 1 : r_hi + 1] - fy))
        return np.sqrt((dy * dy)[:, None] + dx * dx).ravel()

    def ring_bound(self, ring: int, delta: float, kind: str) -> float:
        """Lower bound on MINDIST/MAXDIST for any cell in Chebyshev ring ``ring``.

        ``delta`` is the focal's distance to its home cell (0 when inside).
        """
        s = min(self.cell_width, self.cell_height)
        steps = ring - 1 if kind == "min" else ring
        return steps * s - delta


def fit_geometry(
    relations: Iterable[Sequence[Point]],
    resolution: int | None = None,
    points_per_block: int = DEFAULT_POINTS_PER_BLOCK,
) -> GridGeometry:
    """Square extent around all points, padded by 1% per side.

    Without an explicit ``resolution``, G is chosen so the largest relation
    averages about ``points_per_block`` points per block.
    """
    x_lo = y_lo = math.inf
    x_hi = y_hi = -math.inf
    n_max = 0
    for pts in relations:
        n_max = max(n_max, len(pts))
        for p in pts:
            x_lo = min(x_lo, p.x)
            x_hi = max(x_hi, p.x)
            y_lo = min(y_lo, p.y)
            y_hi = max(y_hi, p.y)
    if n_max == 0:
        x_lo = y_lo = 0.0
        x_hi = y_hi = 1.0
    span = max(x_hi - x_lo, y_hi - y_lo)
    if span <= 0.0:
        span = 1.0
    half = span * 1.02 / 2.0
    cx = (x_lo + x_hi) / 2.0
    cy = (y_lo + y_hi) / 2.0
    if resolution is None:
        resolution = max(1, math.ceil(math.sqrt(n_max / points_per_block)))
    return GridGeometry(Rect(cx - half, cy - half, cx + half, cy + half), resolution)


class RelationStore:
    """One relation's points bucketed by block."""

    def __init__(self, name: str, geometry: GridGeometry, points: Sequence[Point]):
        self.name = name
        n = len(points)
        xs = np.fromiter((p.x for p in points), dtype=np.float64, count=n)
        ys = np.fromiter((p.y for p in points), dtype=np.float64, count=n)
        ids = np.fromiter((p.id for p in points), dtype=np.int64, count=n)
        if n and len(np.unique(ids)) != n:
            uniq, cnt = np.unique(ids, return_counts=True)
            raise IndexBuildError(f"relation {name!r}: duplicate point id {int(uniq[cnt > 1][0])}")
        e = geometry.extent
        outside = (xs < e.x_min) | (xs > e.x_max) | (ys < e.y_min) | (ys > e.y_max)
        if outside.any():
            bad = points[int(np.flatnonzero(outside)[0])]
            raise IndexBuildError(f"relation {name!r}: point {bad} lies outside the grid extent")
        blocks = geometry.locate_many(xs, ys)
        order = np.argsort(blocks, kind="stable")
        self.xs = xs[order]
        self.ys = ys[order]
        self.ids = ids[order]
        self.blocks = blocks[order]
        self.counts = np.bincount(blocks, minlength=geometry.n_blocks).astype(np.int64)
        self.starts = np.zeros(geometry.n_blocks + 1, dtype=np.int64)
        np.cumsum(self.counts, out=self.starts[1:])
        self.points: list[Point] = [points[i] for i in order.tolist()]
        self._starts = self.starts.tolist()
        self._counts = self.counts.tolist()
        # summed-area table of counts, (G+1) x (G+1) row-major with a zero border
        g = geometry.resolution
        table = np.zeros((g + 1, g + 1), dtype=np.int64)
        table[1:, 1:] = self.counts.reshape(g, g).cumsum(0).cumsum(1)
        self._g1 = g + 1
        self._table: list[int] = table.ravel().tolist()
        # list mirrors for the scalar small-query path
        self.x_list: list[float] = self.xs.tolist()
        self.y_list: list[float] = self.ys.tolist()
        self.id_list: list[int] = self.ids.tolist()
        for arr in (self.xs, self.ys, self.ids, self.blocks, self.counts, self.starts):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return len(self.points)

    def count(self, block: int) -> int:
        return self._counts[block]

    def window_count(self, r_lo: int, r_hi: int, c_lo: int, c_hi: int) -> int:
        """Points in the cells ``[r_lo, r_hi) x [c_lo, c_hi)``."""
        t, g1 = self._table, self._g1
        return t[r_hi * g1 + c_hi] - t[r_lo * g1 + c_hi] - t[r_hi * g1 + c_lo] + t[r_lo * g1 + c_lo]

    def bucket(self, block: int) -> list[Point]:
        return self.points[self._starts[block] : self._starts[block + 1]]

    def ids_at(self, positions: Sequence[int]) -> list[int]:
        ids = self.id_list
        return [ids[i] for i in positions]

    def nonempty_blocks(self) -> list[int]:
        return np.flatnonzero(self.counts).tolist()


class GridIndex:
    """Immutable grid over one shared geometry with per-relation occupancy."""

    def __init__(self, geometry: GridGeometry, relations: dict[str, RelationStore]):
        self.geometry = geometry
        self._relations = relations

    @classmethod
    def build(
        cls,
        geometry: GridGeometry,
        relations: Iterable[tuple[str, Sequence[Point]]],
    ) -> GridIndex:
        stores: dict[str, RelationStore] = {}
        for name, pts in relations:
            if name in stores:
                raise IndexBuildError(f"relation {name!r} registered twice")
            stores[name] = RelationStore(name, geometry, pts)
        return cls(geometry, stores)

    @classmethod
    def fit(
        cls,
        relations: dict[str, Sequence[Point]],
        resolution: int | None = None,
        points_per_block: int = DEFAULT_POINTS_PER_BLOCK,
    ) -> GridIndex:
        geometry = fit_geometry(relations.values(), resolution, points_per_block)
        return cls.build(geometry, relations.items())

    def relation(self, name: str) -> RelationStore:
        try:
            return self._relations[name]
        except KeyError:
            raise KeyError(f"unknown relation {name!r}") from None

    @property
    def relation_names(self) -> list[str]:
        return list(self._relations)

    def locate(self, p: Point) -> int:
        return self.geometry.locate(p)

    def count(self, block: int, relation: str) -> int:
        return self.relation(relation).count(block)

    def blocks_by_mindist(self, focal: Point) -> Iterator[tuple[int, float]]:
        return ordered_blocks(self.geometry, focal.x, focal.y, "min")

    def blocks_by_maxdist(self, focal: Point) -> Iterator[tuple[int, float]]:
        return ordered_blocks(self.geometry, focal.x, focal.y, "max")


def ordered_blocks(geometry: GridGeometry, fx: float, fy: float, kind: str) -> Iterator[tuple[int, float]]:
    """Yield ``(block, key)`` for every block in non-decreasing key order.

    ``kind`` selects MINDIST (``"min"``) or MAXDIST (``"max"``); ties go to the
    lower block id, i.e. ``(row, col)`` order.  Windows around the focal cell
    grow geometrically and a window's cells are released only once their key
    is below the bound that every cell outside the window must exceed.
    """
    if kind not in ("min", "max"):
        raise ValueError(f"unknown ordering {kind!r}")
    keyfn = geometry.window_mindists if kind == "min" else geometry.window_maxdists
    row, col, delta = geometry.home(fx, fy)
    lo = -math.inf
    w = 0
    while True:
        r_lo, r_hi, c_lo, c_hi, covers_all = geometry.window(row, col, w)
        keys = keyfn(fx, fy, r_lo, r_hi, c_lo, c_hi)
        hi = math.inf if covers_all else geometry.ring_bound(w + 1, delta, kind)
        sel = np.flatnonzero((keys >= lo) & (keys < hi))
        if len(sel):
            ids = geometry.window_ids(r_lo, r_hi, c_lo, c_hi)[sel]
            keys = keys[sel]
            order = np.lexsort((ids, keys))
            yield from zip(ids[order].tolist(), keys[order].tolist())
        if covers_all:
            return
        lo = hi
        w = max(1, 2 * w)
