import random
from collections import Counter

import pytest

from conftest import bf_chained, bf_knn, bf_unchained, rand_points
from twoknn.geometry import Point
from twoknn.grid import GridIndex
from twoknn.instances import random_instance
from twoknn.knn import get_knn
from twoknn.multi_join import (
    ChainedQuery,
    JoinOrder,
    SafetyMark,
    UnchainedQuery,
    advise_join_order,
    candidate_blocks,
    chained_join_intersection,
    chained_nested_join,
    chained_right_deep,
    coverage,
    safety_marks,
    unchained_baseline,
    unchained_block_marking,
    unchained_contributing_blocks,
    unchained_filtered,
)
from twoknn.operators import knn_join
from twoknn.plans import run_plan

CHAINED = [
    chained_right_deep,
    chained_join_intersection,
    lambda ix, q, st=None: chained_nested_join(ix, q, True, st),
    lambda ix, q, st=None: chained_nested_join(ix, q, False, st),
]


def test_unchained_topology(unchained_topology):
    index, a, b, c = unchained_topology
    q = UnchainedQuery("A", "B", "C", 2, 2)
    want = {(1, 12, 21), (1, 12, 22), (2, 12, 21), (2, 12, 22)}
    assert unchained_baseline(index, q) == want
    for first in ("ab", "cb"):
        assert unchained_block_marking(index, q, first) == want


@pytest.mark.parametrize("first", ["ab", "cb"])
def test_filtering_inner_side_adds_wrong_triplets(unchained_topology, first):
    index, a, b, c = unchained_topology
    q = UnchainedQuery("A", "B", "C", 2, 2)
    wrong = unchained_filtered(index, q, first)
    assert len(wrong) == 8
    assert unchained_baseline(index, q) < wrong


@pytest.mark.parametrize("seed", range(40))
def test_unchained_block_marking_equals_baseline_both_orders(seed):
    inst = random_instance("unchained", seed, max_n=300)
    index = inst.index()
    want = run_plan("unchained", "baseline", index, inst.params)
    assert run_plan("unchained", "block-marking-ab", index, inst.params) == want
    assert run_plan("unchained", "block-marking-cb", index, inst.params) == want


@pytest.mark.parametrize("seed", range(20))
def test_unchained_matches_brute_force(seed):
    rng = random.Random(seed)
    a = rand_points(rng, rng.randint(1, 80))
    b = rand_points(rng, rng.randint(1, 80), first_id=1000)
    c = rand_points(rng, rng.randint(1, 80), first_id=2000)
    q = UnchainedQuery("A", "B", "C", rng.randint(1, 6), rng.randint(1, 6))
    index = GridIndex.fit({"A": a, "B": b, "C": c}, resolution=rng.choice([None, 1, 4, 9]))
    want = bf_unchained(a, b, c, q.k_ab, q.k_cb)
    assert unchained_baseline(index, q) == want
    assert unchained_block_marking(index, q, "ab") == want
    assert unchained_block_marking(index, q, "cb") == want


@pytest.mark.parametrize("seed", range(20))
def test_pruned_blocks_never_reach_a_candidate(seed):
    inst = random_instance("unchained", seed, max_n=400)
    index, p = inst.index(), inst.params
    a, b, c = (index.relation(n).points for n in "ABC")
    if not b:
        return
    pairs = knn_join(index, "A", "B", p.k_ab)
    candidate = candidate_blocks(index, "B", pairs)
    used = {bi for _, bi in pairs}
    contributing = set(unchained_contributing_blocks(index, "B", "C", p.k_cb, candidate))
    store = index.relation("C")
    for block in store.nonempty_blocks():
        if block in contributing:
            continue
        for pt in store.bucket(block):
            assert not {x.id for x in bf_knn(b, pt, p.k_cb)} & used


def test_candidate_and_safe_marks():
    pts_b = [Point(10, 0.1, 0.1), Point(11, 0.9, 0.9)]
    index = GridIndex.fit({"A": [Point(1, 0.0, 0.0)], "B": pts_b, "C": [Point(2, 1.0, 1.0)]}, resolution=2)
    mask = candidate_blocks(index, "B", {(1, 10)})
    marks = safety_marks(mask)
    assert marks[index.locate(pts_b[0])] is SafetyMark.CANDIDATE
    assert marks[index.locate(pts_b[1])] is SafetyMark.SAFE
    assert sum(m is SafetyMark.CANDIDATE for m in marks.values()) == 1


def _advisor_index(n_a_blocks, n_c_blocks):
    rng = random.Random(0)
    g = 10
    spots = [((i % g) + 0.5) / g for i in range(g)]
    cells = [(x, y) for x in spots for y in spots]
    rng.shuffle(cells)
    a = [Point(i, x, y) for i, (x, y) in enumerate(cells[:n_a_blocks])]
    c = [Point(100 + i, x, y) for i, (x, y) in enumerate(cells[:n_c_blocks])]
    b = rand_points(rng, 30, first_id=1000)
    corners = [Point(-5, 0.0, 0.0), Point(-6, 1.0, 1.0)]
    return GridIndex.fit({"A": a, "B": b + corners, "C": c}, resolution=g)


@pytest.mark.parametrize(
    "n_a, n_c, expected",
    [(5, 60, JoinOrder.AB), (60, 5, JoinOrder.CB), (40, 41, JoinOrder.INDEPENDENT)],
)
def test_join_order_advisor(n_a, n_c, expected):
    index = _advisor_index(n_a, n_c)
    q = UnchainedQuery("A", "B", "C", 2, 2)
    assert advise_join_order(index, q) is expected


def test_coverage_fraction():
    index = _advisor_index(5, 60)
    assert coverage(index, "A") == pytest.approx(0.05, abs=0.02)
    assert 0 < coverage(index, "A") < coverage(index, "C") <= 1




@pytest.mark.parametrize("plan", CHAINED)
def test_chained_topology_triplets(chained_topology, plan):
    index, a, b, c = chained_topology
    q = ChainedQuery("A", "B", "C", 2, 2)
    want = {
        (1, 12, 21), (1, 12, 22), (1, 13, 22), (1, 13, 24),
        (2, 12, 21), (2, 12, 22), (2, 13, 22), (2, 13, 24),
    }
    assert plan(index, q) == want


def test_cache_computes_each_b_neighborhood_once(chained_topology):
    index = chained_topology[0]
    q = ChainedQuery("A", "B", "C", 2, 2)
    cached, uncached = Counter(), Counter()
    assert chained_nested_join(index, q, True, cached) == chained_nested_join(index, q, False, uncached)
    assert cached["c_knn"] == 2 and cached["cache_hits"] == 2
    assert uncached["c_knn"] == 4


def test_b_without_a_neighbors_is_never_probed(chained_topology):
    index = chained_topology[0]
    q = ChainedQuery("A", "B", "C", 2, 2)
    qep1, qep3 = Counter(), Counter()
    chained_right_deep(index, q, qep1)
    chained_nested_join(index, q, True, qep3)
    assert qep1["c_knn"] == 3
    assert qep3["c_knn"] == 2


@pytest.mark.parametrize("seed", range(30))
def test_chained_plans_match_brute_force(seed):
    rng = random.Random(seed)
    a = rand_points(rng, rng.randint(1, 80))
    b = rand_points(rng, rng.randint(1, 80), first_id=1000)
    c = rand_points(rng, rng.randint(1, 80), first_id=2000)
    q = ChainedQuery("A", "B", "C", rng.randint(1, 6), rng.randint(1, 6))
    index = GridIndex.fit({"A": a, "B": b, "C": c}, resolution=rng.choice([None, 1, 4, 9]))
    want = bf_chained(a, b, c, q.k_ab, q.k_bc)
    for plan in CHAINED:
        assert plan(index, q) == want


@pytest.mark.parametrize("seed", range(30))
def test_chained_plans_agree(seed):
    inst = random_instance("chained", seed, max_n=300)
    index = inst.index()
    want = run_plan("chained", "qep2", index, inst.params)
    for plan in ("qep1", "qep3-cached", "qep3-uncached"):
        assert run_plan("chained", plan, index, inst.params) == want


@pytest.mark.parametrize("seed", range(10))
def test_cached_counter_equals_distinct_bs(seed):
    inst = random_instance("chained", seed, max_n=300)
    index, p = inst.index(), inst.params
    if not index.relation("B").points:
        return
    stats = Counter()
    chained_nested_join(index, p.chained(), True, stats)
    distinct = {bi for _, bi in knn_join(index, "A", "B", p.k_ab)}
    assert stats["c_knn"] == len(distinct)
    assert stats["c_knn"] + stats["cache_hits"] == sum(
        len(get_knn(index, "B", pt, p.k_ab)) for pt in index.relation("A").points
    )


def test_join_order_rejects_independent_for_marking(unchained_topology):
    index = unchained_topology[0]
    with pytest.raises(ValueError):
        unchained_block_marking(index, UnchainedQuery("A", "B", "C", 1, 1), JoinOrder.INDEPENDENT)


def test_queries_reject_nonpositive_k():
    with pytest.raises(ValueError):
        UnchainedQuery("A", "B", "C", 0, 1)
    with pytest.raises(ValueError):
        ChainedQuery("A", "B", "C", 1, 0)
