"""Seeded synthetic point sets and the plain-text point file format.

Files hold one ``id,x,y`` line per point, no header.  Generators draw from
numpy's PCG64, so a seed fixes the output for this implementation.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Point, Rect

UNIT_SQUARE = Rect(0.0, 0.0, 1.0, 1.0)


class PointFileError(ValueError):
    pass


@dataclass(frozen=True)
class GenSpec:
    kind: str  # "uniform" | "clustered"
    n: int = 0
    extent: Rect = UNIT_SQUARE
    n_clusters: int = 1
    points_per_cluster: int = 0
    cluster_radius: float = 0.05
    seed: int = 0
    first_id: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "clustered"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.n < 0 or self.points_per_cluster < 0:
            raise ValueError("point counts must be non-negative")
        if self.kind == "clustered" and self.n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")
        if self.kind == "clustered" and self.cluster_radius <= 0:
            raise ValueError("cluster_radius must be positive")


def _points(xs: np.ndarray, ys: np.ndarray, first_id: int) -> list[Point]:
    return [Point(first_id + i, x, y) for i, (x, y) in enumerate(zip(xs.tolist(), ys.tolist()))]


def gen_uniform(n: int, extent: Rect = UNIT_SQUARE, seed: int = 0, first_id: int = 0) -> list[Point]:
    rng = np.random.default_rng(seed)
    xs = rng.uniform(extent.x_min, extent.x_max, n)
    ys = rng.uniform(extent.y_min, extent.y_max, n)
    return _points(xs, ys, first_id)


def place_cluster_centers(
    n_clusters: int,
    radius: float,
    extent: Rect = UNIT_SQUARE,
    rng: np.random.Generator | None = None,
    max_tries: int = 10_000,
) -> list[tuple[float, float]]:
    """Disc centers inside ``extent`` spaced at least ``2 * radius`` apart."""
    rng = rng if rng is not None else np.random.default_rng()
    if extent.x_max - extent.x_min < 2 * radius or extent.y_max - extent.y_min < 2 * radius:
        raise ValueError("cluster radius too large for the extent; use a smaller radius")
    centers: list[tuple[float, float]] = []
    tries = 0
    while len(centers) < n_clusters:
        tries += 1
        if tries > max_tries:
            raise ValueError(
                f"could not place {n_clusters} non-overlapping clusters of radius {radius} "
                f"after {max_tries} tries; use a smaller radius"
            )
        cx = rng.uniform(extent.x_min + radius, extent.x_max - radius)
        cy = rng.uniform(extent.y_min + radius, extent.y_max - radius)
        if all(math.hypot(cx - x, cy - y) >= 2 * radius for x, y in centers):
            centers.append((float(cx), float(cy)))
    return centers


def gen_clustered(
    n_clusters: int,
    points_per_cluster: int,
    radius: float,
    extent: Rect = UNIT_SQUARE,
    seed: int = 0,
    first_id: int = 0,
    centers: Sequence[tuple[float, float]] | None = None,
) -> list[Point]:
    """Uniform points in ``n_clusters`` non-overlapping discs.

    Pass ``centers`` to reuse placements (e.g. to keep two relations' clusters
    apart); otherwise they are drawn from the same seeded stream.
    """
    rng = np.random.default_rng(seed)
    if centers is None:
        centers = place_cluster_centers(n_clusters, radius, extent, rng)
    xs, ys = [], []
    for cx, cy in centers:
        rho = radius * np.sqrt(rng.uniform(0.0, 1.0, points_per_cluster))
        theta = rng.uniform(0.0, 2 * math.pi, points_per_cluster)
        xs.append(cx + rho * np.cos(theta))
        ys.append(cy + rho * np.sin(theta))
    if not xs:
        return []
    return _points(np.concatenate(xs), np.concatenate(ys), first_id)


def generate(spec: GenSpec) -> list[Point]:
    if spec.kind == "uniform":
        return gen_uniform(spec.n, spec.extent, spec.seed, spec.first_id)
    return gen_clustered(
        spec.n_clusters, spec.points_per_cluster, spec.cluster_radius, spec.extent, spec.seed, spec.first_id
    )


def write_points(path: str | Path, points: Iterable[Point]) -> None:
    with open(path, "w", newline="\n") as fh:
        for p in points:
            fh.write(f"{p.id},{p.x!r},{p.y!r}\n")


def read_points(path: str | Path) -> list[Point]:
    points = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise PointFileError(f"{path}:{lineno}: expected 'id,x,y', got {line!r}")
            try:
                p = Point(int(parts[0]), float(parts[1]), float(parts[2]))
            except ValueError:
                raise PointFileError(f"{path}:{lineno}: expected 'id,x,y', got {line!r}") from None
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise PointFileError(f"{path}:{lineno}: non-finite coordinate")
            points.append(p)
    return points
