"""Grid-indexed k-nearest-neighbor queries that combine two kNN predicates."""

from .geometry import Point, Rect, dist, maxdist, mindist
from .grid import GridGeometry, GridIndex, IndexBuildError, fit_geometry
from .knn import Neighborhood, build_locality, get_knn
from .multi_join import (
    ChainedQuery,
    JoinOrder,
    UnchainedQuery,
    advise_join_order,
    chained_join_intersection,
    chained_nested_join,
    chained_right_deep,
    unchained_baseline,
    unchained_block_marking,
)
from .operators import baseline_select_join_inner, baseline_select_join_outer, knn_join, knn_select
from .select_join import (
    SelectJoinQuery,
    block_marking_select_join,
    counting_select_join,
    outer_pushdown_select_join,
)
from .two_select import TwoSelectQuery, baseline_two_select, two_knn_select

__all__ = [
    "ChainedQuery", "GridGeometry", "GridIndex", "IndexBuildError", "JoinOrder", "Neighborhood",
    "Point", "Rect", "SelectJoinQuery", "TwoSelectQuery", "UnchainedQuery", "advise_join_order",
    "baseline_select_join_inner", "baseline_select_join_outer", "baseline_two_select",
    "block_marking_select_join", "build_locality", "chained_join_intersection",
    "chained_nested_join", "chained_right_deep", "counting_select_join", "dist", "fit_geometry",
    "get_knn", "knn_join", "knn_select", "maxdist", "mindist", "outer_pushdown_select_join",
    "two_knn_select", "unchained_baseline", "unchained_block_marking",
]
