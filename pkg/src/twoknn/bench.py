"""Timing sweeps that pit each optimized plan against its baseline.

Every experiment returns ``BenchRow``s with the median wall time over
``reps`` repetitions.  Datasets live in the unit square and are derived from
one seed, so a sweep is reproducible up to timing noise.
"""

from __future__ import annotations

import csv
import gc
import random
import statistics
import time
from collections import Counter
from collections.abc import Callable, Iterable, Sequence
from dataclasses import astuple, dataclass, fields
from typing import IO

import numpy as np

from .datagen import gen_clustered, gen_uniform, place_cluster_centers
from .geometry import Point
from .grid import GridIndex
from .multi_join import UnchainedQuery, advise_join_order
from .plans import QueryParams, run_plan

# counter reported per plan in the prune_counter column
PRUNE_KEY = {
    "counting": "skipped_points",
    "block-marking": "noncontributing_blocks",
    "block-marking-ab": "noncontributing_blocks",
    "block-marking-cb": "noncontributing_blocks",
    "qep3-cached": "cache_hits",
    "qep3": "cache_hits",
    "two-knn-select": "locality_blocks",
}


@dataclass(frozen=True)
class BenchRow:
    sweep_value: float
    plan: str
    median_time: float
    result_cardinality: int
    prune_counter: int


def write_csv(rows: Iterable[BenchRow], out: IO[str]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow([f.name for f in fields(BenchRow)])
    for row in rows:
        w.writerow(astuple(row))


def median_time(fn: Callable[[], object], reps: int) -> float:
    if reps < 1:
        raise ValueError("reps must be >= 1")
    times = []
    for _ in range(reps):
        gc.collect()
        gc.disable()
        try:
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        finally:
            gc.enable()
    return statistics.median(times)


def time_plan(
    query_class: str,
    plan: str,
    index: GridIndex,
    params: QueryParams | Sequence[QueryParams],
    reps: int,
    sweep_value: float,
) -> BenchRow:
    """Median time of one plan.  A sequence of params is timed as a batch and
    reported per query; cardinality and counters are batch totals."""
    batch = [params] if isinstance(params, QueryParams) else list(params)
    stats: Counter = Counter()
    cardinality = sum(len(run_plan(query_class, plan, index, p, stats)) for p in batch)
    t = median_time(lambda: [run_plan(query_class, plan, index, p) for p in batch], reps)
    return BenchRow(sweep_value, plan, t / len(batch), cardinality, stats[PRUNE_KEY.get(plan, "")])


def _unit_point(rng: random.Random, pid: int = -1) -> Point:
    return Point(pid, rng.random(), rng.random())


def select_join_sweep(
    outer_sizes: Sequence[int],
    inner_n: int = 100_000,
    outer_clusters: int | None = 20,
    cluster_radius: float = 0.04,
    k_join: int = 8,
    k_select: int = 8,
    plans: Sequence[str] = ("baseline", "block-marking"),
    reps: int = 3,
    seed: int = 0,
    resolution: int | None = None,
) -> list[BenchRow]:
    """kNN-select on the inner relation of a kNN-join, growing the outer
    relation.  ``outer_clusters=None`` makes the outer relation uniform.  The
    focal point sits on the first outer point of the first size, so it lies
    inside the outer data and the result is not trivially empty."""
    rng = random.Random(seed)
    inner = gen_uniform(inner_n, seed=rng.getrandbits(32), first_id=10_000_000)
    data_seed = rng.getrandbits(32)
    focal = None
    rows = []
    for n in outer_sizes:
        if outer_clusters is None:
            outer = gen_uniform(n, seed=data_seed)
        else:
            outer = gen_clustered(outer_clusters, n // outer_clusters, cluster_radius, seed=data_seed)
        if focal is None:
            focal = Point(-1, outer[0].x, outer[0].y)
        index = GridIndex.fit({"A": outer, "B": inner}, resolution=resolution)
        params = QueryParams(k_join=k_join, k_select=k_select, focal=focal)
        rows.extend(time_plan("select-join-inner", p, index, params, reps, n) for p in plans)
    return rows


def unchained_size_sweep(
    c_sizes: Sequence[int],
    a_n: int = 20_000,
    b_n: int = 50_000,
    a_clusters: int = 4,
    cluster_radius: float = 0.03,
    k: int = 8,
    plans: Sequence[str] = ("baseline", "block-marking-ab"),
    reps: int = 3,
    seed: int = 0,
    resolution: int | None = None,
) -> list[BenchRow]:
    """Two unchained joins; A clustered, B and C uniform, C growing."""
    rng = random.Random(seed)
    a = gen_clustered(a_clusters, a_n // a_clusters, cluster_radius, seed=rng.getrandbits(32))
    b = gen_uniform(b_n, seed=rng.getrandbits(32), first_id=10_000_000)
    c_seed = rng.getrandbits(32)
    rows = []
    for n in c_sizes:
        c = gen_uniform(n, seed=c_seed, first_id=20_000_000)
        index = GridIndex.fit({"A": a, "B": b, "C": c}, resolution=resolution)
        params = QueryParams(k_ab=k, k_cb=k)
        rows.extend(time_plan("unchained", p, index, params, reps, n) for p in plans)
    return rows


def cluster_difference_instance(
    delta: int,
    c_clusters: int = 2,
    per_cluster: int = 4000,
    cluster_radius: float = 0.03,
    b_n: int = 50_000,
    seed: int = 0,
) -> dict[str, list[Point]]:
    """A with ``c_clusters + delta`` clusters and C with ``c_clusters``, all of
    equal size and area and mutually non-overlapping; B uniform."""
    rng = random.Random(seed)
    b = gen_uniform(b_n, seed=rng.getrandbits(32), first_id=10_000_000)
    centers = place_cluster_centers(
        c_clusters + delta + c_clusters, cluster_radius, rng=np.random.default_rng(rng.getrandbits(32))
    )
    a_seed, c_seed = rng.getrandbits(32), rng.getrandbits(32)
    a = gen_clustered(
        c_clusters + delta, per_cluster, cluster_radius, seed=a_seed, centers=centers[: c_clusters + delta]
    )
    c = gen_clustered(
        c_clusters, per_cluster, cluster_radius, seed=c_seed, first_id=20_000_000, centers=centers[c_clusters + delta :]
    )
    return {"A": a, "B": b, "C": c}


def cluster_difference_sweep(
    deltas: Sequence[int] = tuple(range(1, 11)),
    c_clusters: int = 2,
    per_cluster: int = 4000,
    cluster_radius: float = 0.03,
    b_n: int = 50_000,
    k: int = 8,
    plans: Sequence[str] = ("block-marking-ab", "block-marking-cb"),
    reps: int = 3,
    seed: int = 0,
    resolution: int | None = None,
) -> list[BenchRow]:
    """Two unchained joins over clustered A and C, varying how many more
    clusters A has.  An ``advised`` row records the advisor's pick (its time
    is the advisor's own run time; cardinality 1 means it picked C first)."""
    rows = []
    for delta in deltas:
        rels = cluster_difference_instance(delta, c_clusters, per_cluster, cluster_radius, b_n, seed)
        index = GridIndex.fit(rels, resolution=resolution)
        params = QueryParams(k_ab=k, k_cb=k)
        rows.extend(time_plan("unchained", p, index, params, reps, delta) for p in plans)
        q = UnchainedQuery("A", "B", "C", k, k)
        t = median_time(lambda: advise_join_order(index, q), reps)
        rows.append(BenchRow(delta, "advised-cb-first", t, int(advise_join_order(index, q).value == "cb"), 0))
    return rows


def chained_size_sweep(
    a_sizes: Sequence[int],
    b_n: int = 5_000,
    c_n: int = 20_000,
    k: int = 8,
    plans: Sequence[str] = ("qep3-uncached", "qep3-cached"),
    reps: int = 3,
    seed: int = 0,
    resolution: int | None = None,
) -> list[BenchRow]:
    """Two chained joins with A much denser than B, so many a's share b's."""
    rng = random.Random(seed)
    a_seed = rng.getrandbits(32)
    b = gen_uniform(b_n, seed=rng.getrandbits(32), first_id=10_000_000)
    c = gen_uniform(c_n, seed=rng.getrandbits(32), first_id=20_000_000)
    rows = []
    for n in a_sizes:
        a = gen_uniform(n, seed=a_seed)
        index = GridIndex.fit({"A": a, "B": b, "C": c}, resolution=resolution)
        params = QueryParams(k_ab=k, k_bc=k)
        rows.extend(time_plan("chained", p, index, params, reps, n) for p in plans)
    return rows


def chained_cluster_instance(
    b_clusters: int,
    a_n: int = 2_000,
    per_cluster: int = 4_000,
    c_n: int = 20_000,
    cluster_radius: float = 0.03,
    seed: int = 0,
) -> dict[str, list[Point]]:
    """A concentrated near one B cluster; the other B clusters lie far from A."""
    rng = random.Random(seed)
    centers = place_cluster_centers(b_clusters, cluster_radius, rng=np.random.default_rng(rng.getrandbits(32)))
    b = gen_clustered(b_clusters, per_cluster, cluster_radius, seed=rng.getrandbits(32), first_id=10_000_000, centers=centers)
    a = gen_clustered(1, a_n, cluster_radius, seed=rng.getrandbits(32), centers=centers[:1])
    c = gen_uniform(c_n, seed=rng.getrandbits(32), first_id=20_000_000)
    return {"A": a, "B": b, "C": c}


def chained_cluster_sweep(
    cluster_counts: Sequence[int] = (2, 6, 10),
    a_n: int = 2_000,
    per_cluster: int = 4_000,
    c_n: int = 20_000,
    cluster_radius: float = 0.03,
    k: int = 8,
    plans: Sequence[str] = ("qep2", "qep3-cached"),
    reps: int = 3,
    seed: int = 0,
    resolution: int | None = None,
) -> list[BenchRow]:
    """Two chained joins with clustered B, varying the number of B clusters."""
    rows = []
    for n_clusters in cluster_counts:
        rels = chained_cluster_instance(n_clusters, a_n, per_cluster, c_n, cluster_radius, seed)
        index = GridIndex.fit(rels, resolution=resolution)
        params = QueryParams(k_ab=k, k_bc=k)
        rows.extend(time_plan("chained", p, index, params, reps, n_clusters) for p in plans)
    return rows


def two_select_sweep(
    exponents: Sequence[int] = tuple(range(9)),
    k1: int = 10,
    n: int = 500_000,
    queries: int = 20,
    focal_spread: float = 0.001,
    plans: Sequence[str] = ("baseline", "two-knn-select"),
    reps: int = 3,
    seed: int = 0,
    resolution: int | None = None,
) -> list[BenchRow]:
    """Two kNN-selects with ``k2 = k1 * 2**i``; each timing is a batch of
    ``queries`` focal pairs, the second focal within ``focal_spread`` of the
    first on each axis.  Sweep value is ``i``."""
    rng = random.Random(seed)
    index = GridIndex.fit({"A": gen_uniform(n, seed=rng.getrandbits(32))}, resolution=resolution)
    pairs = []
    for _ in range(queries):
        f1 = _unit_point(rng, -1)
        f2 = Point(-2, f1.x + rng.uniform(-focal_spread, focal_spread), f1.y + rng.uniform(-focal_spread, focal_spread))
        pairs.append((f1, f2))
    rows = []
    for i in exponents:
        batch = [QueryParams(k1=k1, k2=k1 * 2**i, focal=f1, focal2=f2) for f1, f2 in pairs]
        rows.extend(time_plan("two-select", p, index, batch, reps, i) for p in plans)
    return rows


EXPERIMENTS: dict[str, tuple[Callable[..., list[BenchRow]], dict]] = {
    # name: (function, desk-scale arguments)
    "select-join-clustered": (select_join_sweep, {"outer_sizes": [12_500, 25_000, 50_000, 100_000, 200_000]}),
    "select-join-uniform-small": (
        select_join_sweep,
        {"outer_sizes": [1_250, 2_500, 5_000], "outer_clusters": None, "plans": ("counting", "block-marking")},
    ),
    "select-join-uniform-large": (
        select_join_sweep,
        {"outer_sizes": [50_000, 100_000, 200_000], "outer_clusters": None, "plans": ("counting", "block-marking")},
    ),
    "unchained-size": (unchained_size_sweep, {"c_sizes": [12_500, 25_000, 50_000, 100_000]}),
    "unchained-cluster-gap": (cluster_difference_sweep, {}),
    "chained-size": (chained_size_sweep, {"a_sizes": [10_000, 20_000, 40_000]}),
    "chained-clusters": (chained_cluster_sweep, {}),
    "two-select-ratio": (two_select_sweep, {}),
}


def run_experiment(name: str, reps: int = 3, seed: int = 0, resolution: int | None = None, **overrides) -> list[BenchRow]:
    try:
        fn, args = EXPERIMENTS[name]
    except KeyError:
        raise KeyError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}") from None
    return fn(**{**args, **overrides}, reps=reps, seed=seed, resolution=resolution)
