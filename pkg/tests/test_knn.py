import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bf_knn, rand_points
from twoknn.geometry import Point, Rect, maxdist, mindist
from twoknn.grid import GridGeometry, GridIndex
from twoknn.knn import (
    Neighborhood,
    build_locality,
    get_knn,
    intersect,
    knn_positions,
    locality_blocks,
    select_from_blocks,
)


def _literal_locality(index, relation, f, k):
    """Two-phase scan over fully sorted block lists."""
    geo = index.geometry
    store = index.relation(relation)
    rects = [geo.block_rect(b) for b in range(geo.n_blocks)]
    by_max = sorted(range(geo.n_blocks), key=lambda b: (maxdist(f, rects[b]), b))
    by_min = sorted(range(geo.n_blocks), key=lambda b: (mindist(f, rects[b]), b))
    if len(store) < k:
        return {b for b in by_min if store.count(b)}, math.inf
    taken, count = [], 0
    for b in by_max:
        taken.append(b)
        count += store.count(b)
        if count >= k:
            m = maxdist(f, rects[b])
            break
    locality = set(taken)
    for b in by_min:
        if mindist(f, rects[b]) > m:
            break
        locality.add(b)
    return locality, m


def _instance(seed, n_max=400, lattice=False):
    rng = random.Random(seed)
    n = rng.randint(1, n_max)
    pts = rand_points(rng, min(n, 100), lattice=10) if lattice else rand_points(rng, n)
    index = GridIndex.fit({"E": pts}, resolution=rng.choice([None, 1, 3, 4, 8, 16]))
    f = Point(-1, rng.uniform(-0.3, 1.3), rng.uniform(-0.3, 1.3))
    if lattice:
        f = Point(-1, float(rng.randint(0, 9)), float(rng.randint(0, 9)))
    return index, pts, f, rng.randint(1, 40)


@pytest.mark.parametrize("seed", range(60))
def test_locality_matches_literal_two_phase_scan(seed):
    index, pts, f, k = _instance(seed)
    loc = build_locality(index, "E", f, k)
    expected, m = _literal_locality(index, "E", f, k)
    assert loc.watermark == m
    if math.isinf(m):
        assert expected <= set(loc.blocks)
    else:
        assert set(loc.blocks) == expected


@pytest.mark.parametrize("seed", range(60))
@pytest.mark.parametrize("lattice", [False, True])
def test_get_knn_matches_brute_force(seed, lattice):
    index, pts, f, k = _instance(seed, lattice=lattice)
    nbr = get_knn(index, "E", f, k)
    expected = bf_knn(pts, f, k)
    assert [p.id for p in nbr.points] == [p.id for p in expected]
    assert nbr.distances == [math.sqrt((p.x - f.x) ** 2 + (p.y - f.y) ** 2) for p in expected]


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=40, unique=True),
    st.integers(0, 6),
    st.integers(0, 6),
    st.integers(1, 12),
    st.sampled_from([1, 2, 3, 5]),
)
def test_get_knn_with_heavy_ties(cells, fx, fy, k, g):
    pts = [Point(i, float(x), float(y)) for i, (x, y) in enumerate(cells)]
    index = GridIndex.fit({"E": pts}, resolution=g)
    f = Point(-1, float(fx), float(fy))
    assert [p.id for p in get_knn(index, "E", f, k).points] == [p.id for p in bf_knn(pts, f, k)]


@pytest.mark.parametrize("seed", range(40))
def test_locality_contains_true_neighborhood(seed):
    index, pts, f, k = _instance(seed)
    store = index.relation("E")
    loc = build_locality(index, "E", f, k)
    bucketed = {p.id for b in loc.blocks for p in store.bucket(b)}
    assert {p.id for p in bf_knn(pts, f, k)} <= bucketed


def test_single_occupied_block():
    geo = GridGeometry(Rect(0, 0, 4, 4), 4)
    pts = [Point(i, 0.2 + 0.1 * i, 0.5) for i in range(5)]
    index = GridIndex.build(geo, [("E", pts)])
    f = Point(-1, 3.5, 3.5)
    loc = build_locality(index, "E", f, 3)
    assert 0 in loc.blocks
    assert loc.watermark == maxdist(f, geo.block_rect(0))
    assert set(loc.blocks) == {b for b in range(16) if mindist(f, geo.block_rect(b)) <= loc.watermark}


def test_exhausted_relation_covers_all_nonempty_blocks():
    rng = random.Random(4)
    pts = rand_points(rng, 30)
    index = GridIndex.fit({"E": pts}, resolution=8)
    loc = build_locality(index, "E", Point(-1, 0.1, 0.9), 31)
    assert math.isinf(loc.watermark)
    assert set(loc.blocks) == set(index.relation("E").nonempty_blocks())


def test_singleton_relation():
    index = GridIndex.fit({"E": [Point(7, 0.3, 0.3)]})
    assert [p.id for p in get_knn(index, "E", Point(-1, 5.0, -2.0), 1).points] == [7]


def test_k_equal_cardinality_returns_sorted_relation():
    rng = random.Random(8)
    pts = rand_points(rng, 50)
    index = GridIndex.fit({"E": pts}, resolution=5)
    f = Point(-1, 0.5, 0.5)
    nbr = get_knn(index, "E", f, 50)
    assert [p.id for p in nbr.points] == [p.id for p in bf_knn(pts, f, 50)]
    assert nbr.distances == sorted(nbr.distances)


def test_empty_relation_gives_empty_neighborhood():
    index = GridIndex.fit({"E": [], "F": [Point(0, 0, 0)]})
    nbr = get_knn(index, "E", Point(-1, 0, 0), 3)
    assert len(nbr) == 0 and not nbr


def test_k_must_be_positive():
    index = GridIndex.fit({"E": [Point(0, 0, 0)]})
    with pytest.raises(ValueError):
        get_knn(index, "E", Point(-1, 0, 0), 0)


def test_farthest_distance_grows_with_k():
    rng = random.Random(9)
    pts = rand_points(rng, 500)
    index = GridIndex.fit({"E": pts})
    f = Point(-1, 0.2, 0.7)
    far = [get_knn(index, "E", f, k).farthest_distance for k in range(1, 60)]
    assert far == sorted(far)


@pytest.mark.parametrize("seed", range(30))
def test_scalar_and_array_paths_agree_bitwise(seed):
    rng = random.Random(seed)
    pts = rand_points(rng, rng.randint(50, 3000))
    index = GridIndex.fit({"E": pts}, points_per_block=rng.choice([2, 4, 16, 64]))
    store, geo = index.relation("E"), index.geometry
    for _ in range(10):
        fx, fy = rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2)
        k = rng.randint(1, 60)
        blocks, _ = locality_blocks(store, geo, fx, fy, k)
        pos, d = select_from_blocks(store, blocks, fx, fy, k)
        assert knn_positions(store, geo, fx, fy, k) == (pos.tolist(), d.tolist())


def test_intersect():
    pts = [Point(i, float(i), 0.0) for i in range(6)]
    a = Neighborhood(Point(-1, 0, 0), 3, pts[:3], [0.0, 1.0, 2.0])
    b = Neighborhood(Point(-1, 5, 0), 3, pts[5:2:-1], [0.0, 1.0, 2.0])
    c = Neighborhood(Point(-1, 2, 0), 3, [pts[2], pts[1], pts[3]], [0.0, 1.0, 1.0])
    assert intersect(a, a) == pts[:3]
    assert intersect(a, b) == []
    assert intersect(a, c) == [pts[1], pts[2]]


@pytest.mark.parametrize("seed", range(10))
def test_intersect_matches_id_sets(seed):
    rng = random.Random(seed)
    pts = rand_points(rng, 300)
    index = GridIndex.fit({"E": pts})
    f1, f2 = Point(-1, rng.random(), rng.random()), Point(-2, rng.random(), rng.random())
    k1, k2 = rng.randint(1, 100), rng.randint(1, 100)
    got = intersect(get_knn(index, "E", f1, k1), get_knn(index, "E", f2, k2))
    want = {p.id for p in bf_knn(pts, f1, k1)} & {p.id for p in bf_knn(pts, f2, k2)}
    assert [p.id for p in got] == sorted(want)


def test_neighborhood_helpers():
    pts = [Point(1, 0, 0), Point(2, 3, 0)]
    nbr = Neighborhood(Point(-1, 0, 0), 2, pts, [0.0, 3.0])
    assert nbr.ids == {1, 2}
    assert nbr.nearest_to(Point(0, 2.5, 0)).id == 2
    assert nbr.farthest_to(Point(0, 2.5, 0)).id == 1
    assert nbr.members == [(pts[0], 0.0), (pts[1], 3.0)]
    assert np.isclose(nbr.farthest_distance, 3.0)
