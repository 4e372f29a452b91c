import io

import pytest

from twoknn import bench
from twoknn.cli import QUICK


@pytest.mark.parametrize("name", sorted(bench.EXPERIMENTS))
def test_quick_experiments_produce_consistent_rows(name):
    rows = bench.run_experiment(name, reps=1, seed=1, **QUICK[name])
    assert rows
    assert all(r.median_time >= 0 and r.result_cardinality >= 0 for r in rows)
    # plans of one sweep point answer the same query
    by_value = {}
    for r in rows:
        if r.plan != "advised-cb-first":
            by_value.setdefault(r.sweep_value, set()).add(r.result_cardinality)
    assert all(len(v) == 1 for v in by_value.values())


def test_csv_layout():
    out = io.StringIO()
    bench.write_csv([bench.BenchRow(1, "baseline", 0.5, 3, 0)], out)
    assert out.getvalue() == "sweep_value,plan,median_time,result_cardinality,prune_counter\n1,baseline,0.5,3,0\n"


def test_median_time_rejects_zero_reps():
    with pytest.raises(ValueError):
        bench.median_time(lambda: None, 0)


def test_unknown_experiment():
    with pytest.raises(KeyError):
        bench.run_experiment("nope")
