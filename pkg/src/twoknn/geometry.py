"""Euclidean primitives between points and axis-aligned blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class Point:
    id: int
    x: float
    y: float


@dataclass(frozen=True, slots=True)
class Rect:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise ValueError(f"inverted rectangle: {self}")

    @property
    def diagonal(self) -> float:
        w = self.x_max - self.x_min
        h = self.y_max - self.y_min
        return math.sqrt(w * w + h * h)

    @property
    def center(self) -> Point:
        # id -1 marks a synthetic location that is not a data point
        return Point(-1, (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def corners(self) -> tuple[tuple[float, float], ...]:
        return (
            (self.x_min, self.y_min),
            (self.x_min, self.y_max),
            (self.x_max, self.y_min),
            (self.x_max, self.y_max),
        )

    def contains(self, p: Point) -> bool:
        return self.x_min <= p.x <= self.x_max and self.y_min <= p.y <= self.y_max


def dist(p: Point, q: Point) -> float:
    dx = p.x - q.x
    dy = p.y - q.y
    return math.sqrt(dx * dx + dy * dy)


def mindist(p: Point, r: Rect) -> float:
    """Smallest distance from ``p`` to any location of ``r`` (0 inside)."""
    dx = max(r.x_min - p.x, 0.0, p.x - r.x_max)
    dy = max(r.y_min - p.y, 0.0, p.y - r.y_max)
    return math.sqrt(dx * dx + dy * dy)


def maxdist(p: Point, r: Rect) -> float:
    """Largest distance from ``p`` to any location of ``r``.

    Always attained at a corner, so the corners are enumerated.
    """
    best = 0.0
    for cx, cy in r.corners():
        dx = p.x - cx
        dy = p.y - cy
        best = max(best, dx * dx + dy * dy)
    return math.sqrt(best)
