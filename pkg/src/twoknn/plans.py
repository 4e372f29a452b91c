"""Name-based access to every plan, keyed by query class.

Relations are always named ``A``, ``B``, ``C``: select-join queries use A as
the outer and B as the inner relation, two-select queries run on A.
Results are normalized to sorted id tuples so equivalent plans compare equal.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Callable
from dataclasses import dataclass

from .geometry import Point
from .grid import GridIndex
from .multi_join import (
    ChainedQuery,
    JoinOrder,
    UnchainedQuery,
    chained_join_intersection,
    chained_nested_join,
    chained_right_deep,
    unchained_baseline,
    unchained_block_marking,
    unchained_filtered,
)
from .operators import baseline_select_join_inner, baseline_select_join_outer, invalid_inner_pushdown
from .select_join import (
    SelectJoinQuery,
    block_marking_select_join,
    counting_select_join,
    outer_pushdown_select_join,
)
from .two_select import TwoSelectQuery, baseline_two_select, sequential_two_select, two_knn_select

Row = tuple[int, ...]


@dataclass(frozen=True)
class QueryParams:
    k_join: int = 8
    k_select: int = 8
    k1: int = 8
    k2: int = 8
    k_ab: int = 8
    k_cb: int = 8
    k_bc: int = 8
    focal: Point = Point(-1, 0.5, 0.5)
    focal2: Point = Point(-2, 0.5, 0.5)
    first: str = "ab"
    cache: bool = True

    def select_join(self) -> SelectJoinQuery:
        return SelectJoinQuery("A", "B", self.k_join, self.k_select, self.focal)

    def unchained(self) -> UnchainedQuery:
        return UnchainedQuery("A", "B", "C", self.k_ab, self.k_cb)

    def chained(self) -> ChainedQuery:
        return ChainedQuery("A", "B", "C", self.k_ab, self.k_bc)

    def two_select(self) -> TwoSelectQuery:
        return TwoSelectQuery("A", self.focal, self.k1, self.focal2, self.k2)


Plan = Callable[[GridIndex, QueryParams, Counter], set]


def _pairs_sji(fn):
    return lambda ix, p, st: fn(ix, "A", "B", p.k_join, p.k_select, p.focal, stats=st)


def _ids(fn):
    return lambda ix, p, st: {(pt.id,) for pt in fn(ix, p.two_select(), st)}


PLANS: dict[str, dict[str, Plan]] = {
    "select-join-inner": {
        "baseline": _pairs_sji(baseline_select_join_inner),
        "counting": lambda ix, p, st: counting_select_join(ix, p.select_join(), st),
        "block-marking": lambda ix, p, st: block_marking_select_join(ix, p.select_join(), st),
        "invalid-inner-pushdown": _pairs_sji(invalid_inner_pushdown),
    },
    "select-join-outer": {
        "baseline": _pairs_sji(baseline_select_join_outer),
        "outer-pushdown": lambda ix, p, st: outer_pushdown_select_join(ix, p.select_join(), st),
    },
    "unchained": {
        "baseline": lambda ix, p, st: unchained_baseline(ix, p.unchained(), st),
        "block-marking": lambda ix, p, st: unchained_block_marking(ix, p.unchained(), p.first, st),
        "block-marking-ab": lambda ix, p, st: unchained_block_marking(ix, p.unchained(), JoinOrder.AB, st),
        "block-marking-cb": lambda ix, p, st: unchained_block_marking(ix, p.unchained(), JoinOrder.CB, st),
        "filtered-ab-first": lambda ix, p, st: unchained_filtered(ix, p.unchained(), JoinOrder.AB, st),
        "filtered-cb-first": lambda ix, p, st: unchained_filtered(ix, p.unchained(), JoinOrder.CB, st),
    },
    "chained": {
        "qep1": lambda ix, p, st: chained_right_deep(ix, p.chained(), st),
        "qep2": lambda ix, p, st: chained_join_intersection(ix, p.chained(), st),
        "qep3": lambda ix, p, st: chained_nested_join(ix, p.chained(), p.cache, st),
        "qep3-cached": lambda ix, p, st: chained_nested_join(ix, p.chained(), True, st),
        "qep3-uncached": lambda ix, p, st: chained_nested_join(ix, p.chained(), False, st),
    },
    "two-select": {
        "baseline": _ids(baseline_two_select),
        "two-knn-select": _ids(two_knn_select),
        "sequential": _ids(sequential_two_select),
        "sequential-reversed": lambda ix, p, st: {
            (pt.id,) for pt in sequential_two_select(ix, TwoSelectQuery("A", p.focal2, p.k2, p.focal, p.k1), st)
        },
    },
}

# plans that are wrong on purpose and only serve as negative controls
INCORRECT_PLANS = {
    ("select-join-inner", "invalid-inner-pushdown"),
    ("unchained", "filtered-ab-first"),
    ("unchained", "filtered-cb-first"),
    ("two-select", "sequential"),
    ("two-select", "sequential-reversed"),
}


def run_plan(
    query_class: str, plan: str, index: GridIndex, params: QueryParams, stats: Counter | None = None
) -> list[Row]:
    try:
        fn = PLANS[query_class][plan]
    except KeyError:
        raise KeyError(f"no plan {plan!r} for query class {query_class!r}") from None
    return sorted(fn(index, params, stats if stats is not None else Counter()))
