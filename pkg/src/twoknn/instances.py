"""Seeded random query instances for equivalence checking."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

from .datagen import gen_clustered, gen_uniform
from .geometry import Point, Rect
from .grid import GridIndex
from .plans import QueryParams

RELATIONS_FOR = {
    "select-join-inner": ("A", "B"),
    "select-join-outer": ("A", "B"),
    "unchained": ("A", "B", "C"),
    "chained": ("A", "B", "C"),
    "two-select": ("A",),
}

K_RATIOS = [2**i for i in range(9)]


@dataclass
class Instance:
    query_class: str
    relations: dict[str, list[Point]]
    params: QueryParams
    resolution: int | None = None
    seed: int = 0
    _index: GridIndex | None = field(default=None, repr=False)

    def index(self) -> GridIndex:
        if self._index is None:
            self._index = GridIndex.fit(self.relations, resolution=self.resolution)
        return self._index


def _relation(rng: random.Random, n: int, first_id: int) -> list[Point]:
    seed = rng.getrandbits(32)
    if n == 0 or rng.random() < 0.5:
        return gen_uniform(n, seed=seed, first_id=first_id)
    n_clusters = rng.randint(1, 5)
    per = max(1, n // n_clusters)
    radius = rng.choice([0.02, 0.05, 0.1])
    return gen_clustered(n_clusters, per, radius, seed=seed, first_id=first_id)


def _focal(rng: random.Random, pid: int) -> Point:
    return Point(pid, rng.uniform(-0.1, 1.1), rng.uniform(-0.1, 1.1))


def _cap_fan_out(
    rng: random.Random, relations: dict[str, list[Point]], params: QueryParams, max_n: int, max_triplets: int
) -> QueryParams:
    """Unchained results number about ``|A| |C| k_ab k_cb / |B|``: a small B
    makes nearly every (a, c) pair share a neighbor.  Grow B, then shrink the
    k's, until that estimate fits ``max_triplets``."""
    n_a, n_c = len(relations["A"]), len(relations["C"])
    k_ab, k_cb = params.k_ab, params.k_cb
    need = math.ceil(n_a * n_c * k_ab * k_cb / max_triplets)
    if need > len(relations["B"]):
        relations["B"] = _relation(rng, min(max_n, need), 10_000_000)
    while n_a * n_c * k_ab * k_cb > max_triplets * max(len(relations["B"]), 1) and max(k_ab, k_cb) > 1:
        if k_ab >= k_cb:
            k_ab = max(1, k_ab // 2)
        else:
            k_cb = max(1, k_cb // 2)
    return replace(params, k_ab=k_ab, k_cb=k_cb)


def random_instance(
    query_class: str,
    seed: int,
    max_n: int = 2000,
    max_k: int = 16,
    resolutions: tuple[int | None, ...] = (None, 1, 4, 8, 16),
    max_triplets: int = 200_000,
) -> Instance:
    """Relations of up to ``max_n`` points (uniform or clustered), random k's
    up to ``max_k``, focal points anywhere around the unit square.

    Unchained instances are kept near ``max_triplets`` expected results; see
    ``_cap_fan_out``.
    """
    if query_class not in RELATIONS_FOR:
        raise ValueError(f"unknown query class {query_class!r}")
    rng = random.Random(seed)
    relations = {}
    for i, name in enumerate(RELATIONS_FOR[query_class]):
        relations[name] = _relation(rng, rng.randint(0, max_n) if rng.random() < 0.05 else rng.randint(1, max_n), i * 10_000_000)
    k = lambda: rng.randint(1, max_k)  # noqa: E731
    if query_class == "two-select":
        k1 = rng.randint(1, max(1, max_k))
        k2 = k1 * rng.choice(K_RATIOS)
        if rng.random() < 0.5:
            k1, k2 = k2, k1
        f1 = _focal(rng, -1)
        # second focal usually near the first, where truncation pays off
        if rng.random() < 0.7:
            f2 = Point(-2, f1.x + rng.gauss(0, 0.05), f1.y + rng.gauss(0, 0.05))
        else:
            f2 = _focal(rng, -2)
        params = QueryParams(k1=k1, k2=k2, focal=f1, focal2=f2)
    else:
        params = QueryParams(
            k_join=k(), k_select=k(), k_ab=k(), k_cb=k(), k_bc=k(),
            focal=_focal(rng, -1), first=rng.choice(["ab", "cb"]),
        )
    if query_class == "unchained":
        params = _cap_fan_out(rng, relations, params, max_n, max_triplets)
    return Instance(query_class, relations, params, rng.choice(resolutions), seed)


__all__ = ["Instance", "K_RATIOS", "random_instance", "Rect"]
