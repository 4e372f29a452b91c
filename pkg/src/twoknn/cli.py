"""Command-line front end: ``gen``, ``run``, ``verify`` and ``bench``.

Exit codes: 0 success, 1 verification mismatch, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from collections import Counter
from collections.abc import Callable, Sequence
from dataclasses import asdict, replace
from pathlib import Path

from . import bench
from .datagen import GenSpec, PointFileError, generate, read_points, write_points
from .geometry import Point, Rect
from .grid import GridIndex, IndexBuildError
from .instances import RELATIONS_FOR, Instance, random_instance
from .plans import INCORRECT_PLANS, PLANS, QueryParams, run_plan

log = logging.getLogger("twoknn")

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _xy(text: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y but got {text!r}") from None
    return x, y


def _extent(text: str) -> Rect:
    try:
        return Rect(*(float(v) for v in text.split(",")))
    except (TypeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"expected XMIN,YMIN,XMAX,YMAX: {exc}") from None


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _add_query_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--query", required=True, choices=sorted(PLANS), help="query class")
    for flag in ("--kjoin", "--kselect", "--k1", "--k2", "--kab", "--kcb", "--kbc"):
        p.add_argument(flag, type=_positive, default=8)
    p.add_argument("--focal", type=_xy, default=(0.5, 0.5), metavar="X,Y")
    p.add_argument("--focal2", type=_xy, default=(0.5, 0.5), metavar="X,Y")
    p.add_argument("--first", choices=["ab", "cb"], default="ab", help="unchained: which join runs first")
    p.add_argument("--cache", choices=["on", "off"], default="on", help="chained qep3: neighborhood caching")


def _params(args: argparse.Namespace) -> QueryParams:
    return QueryParams(
        k_join=args.kjoin,
        k_select=args.kselect,
        k1=args.k1,
        k2=args.k2,
        k_ab=args.kab,
        k_cb=args.kcb,
        k_bc=args.kbc,
        focal=Point(-1, *args.focal),
        focal2=Point(-2, *args.focal2),
        first=args.first,
        cache=args.cache == "on",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twoknn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a point file")
    g.add_argument("--kind", choices=["uniform", "clustered"], required=True)
    g.add_argument("--n", type=int, default=0, help="number of points (uniform)")
    g.add_argument("--clusters", type=int, default=1)
    g.add_argument("--per-cluster", type=int, default=0)
    g.add_argument("--radius", type=float, default=0.05, help="cluster radius")
    g.add_argument("--extent", type=_extent, default=Rect(0.0, 0.0, 1.0, 1.0), metavar="X0,Y0,X1,Y1")
    g.add_argument("--first-id", type=int, default=0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    r = sub.add_parser("run", help="run one plan and write its result set")
    _add_query_flags(r)
    r.add_argument("--plan", required=True)
    r.add_argument("--rel-a", required=True, metavar="PATH")
    r.add_argument("--rel-b", metavar="PATH")
    r.add_argument("--rel-c", metavar="PATH")
    r.add_argument("--grid", type=_positive, help="grid resolution G (blocks per side)")
    r.add_argument("--reps", type=_positive, default=1)
    r.add_argument("--out", help="result file (default: stdout)")

    v = sub.add_parser("verify", help="check that plans agree on seeded random instances")
    v.add_argument("--query", required=True, choices=sorted(PLANS))
    v.add_argument("--plans", required=True, help="comma-separated plan names (at least two)")
    v.add_argument("--instances", type=_positive, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--max-n", type=_positive, default=2000)
    v.add_argument("--max-k", type=_positive, default=16)
    v.add_argument("--grid", type=_positive)
    v.add_argument("--out", default="mismatch", help="directory for the minimal differing instance")
    v.add_argument("--no-shrink", action="store_true", help="keep the differing instance as found")

    b = sub.add_parser("bench", help="timing sweep to CSV")
    b.add_argument("--experiment", required=True, choices=sorted(bench.EXPERIMENTS))
    b.add_argument("--reps", type=_positive, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--grid", type=_positive)
    b.add_argument("--quick", action="store_true", help="small sizes for a fast smoke run")
    b.add_argument("--out", help="CSV file (default: stdout)")
    return parser


# -- gen -----------------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    n = args.n if args.kind == "uniform" else args.clusters * args.per_cluster
    try:
        spec = GenSpec(
            kind=args.kind,
            n=n,
            extent=args.extent,
            n_clusters=args.clusters,
            points_per_cluster=args.per_cluster,
            cluster_radius=args.radius,
            seed=args.seed,
            first_id=args.first_id,
        )
        points = generate(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    write_points(args.out, points)
    log.info("wrote %d points to %s", len(points), args.out)
    return EXIT_OK


# -- run -----------------------------------------------------------------------


def format_rows(rows: Sequence[tuple[int, ...]]) -> str:
    return "".join(",".join(map(str, row)) + "\n" for row in rows)


def _load(args: argparse.Namespace) -> dict[str, list[Point]]:
    rels = {}
    for name in RELATIONS_FOR[args.query]:
        path = getattr(args, f"rel_{name.lower()}")
        if path is None:
            raise UsageError(f"query class {args.query} needs --rel-{name.lower()}")
        try:
            rels[name] = read_points(path)
        except (OSError, PointFileError) as exc:
            raise UsageError(str(exc)) from exc
    return rels


def cmd_run(args: argparse.Namespace) -> int:
    if args.plan not in PLANS[args.query]:
        raise UsageError(f"plan {args.plan!r} is not valid for {args.query}; choose from {', '.join(PLANS[args.query])}")
    rels = _load(args)
    try:
        index = GridIndex.fit(rels, resolution=args.grid)
    except IndexBuildError as exc:
        raise UsageError(str(exc)) from exc
    params = _params(args)
    stats: Counter = Counter()
    rows = run_plan(args.query, args.plan, index, params, stats)
    elapsed = bench.median_time(lambda: run_plan(args.query, args.plan, index, params), args.reps)
    text = format_rows(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    counters = " ".join(f"{k}={v}" for k, v in sorted(stats.items()))
    flag = " (incorrect plan)" if (args.query, args.plan) in INCORRECT_PLANS else ""
    print(f"plan={args.plan}{flag} time={elapsed:.6f} cardinality={len(rows)} {counters}".rstrip(), file=sys.stderr)
    return EXIT_OK


# -- verify --------------------------------------------------------------------


def _results(inst: Instance, plans: Sequence[str]) -> dict[str, list[tuple[int, ...]]]:
    index = inst.index()
    return {p: run_plan(inst.query_class, p, index, inst.params) for p in plans}


def _differs(inst: Instance, plans: Sequence[str]) -> bool:
    results = list(_results(inst, plans).values())
    return any(r != results[0] for r in results[1:])


def shrink(inst: Instance, still_fails: Callable[[Instance], bool], max_checks: int = 2000) -> Instance:
    """Greedily drop chunks of points (halves, then quarters, ...) while the
    instance keeps failing."""
    checks = 0
    current = inst
    for name in list(current.relations):
        chunk = max(1, len(current.relations[name]) // 2)
        while chunk >= 1 and checks < max_checks:
            pts = current.relations[name]
            removed = False
            for start in range(0, len(pts), chunk):
                candidate = replace(current, relations={**current.relations, name: pts[:start] + pts[start + chunk :]}, _index=None)
                checks += 1
                if still_fails(candidate):
                    current = candidate
                    removed = True
                    break
                if checks >= max_checks:
                    break
            if not removed:
                chunk //= 2
    return current


def write_instance(inst: Instance, directory: str | Path) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for name, pts in inst.relations.items():
        write_points(out / f"{name}.csv", pts)
    params = asdict(inst.params)
    params["focal"] = [inst.params.focal.x, inst.params.focal.y]
    params["focal2"] = [inst.params.focal2.x, inst.params.focal2.y]
    meta = {"query": inst.query_class, "seed": inst.seed, "grid": inst.resolution, "params": params}
    (out / "instance.json").write_text(json.dumps(meta, indent=2) + "\n")
    return out


def cmd_verify(args: argparse.Namespace) -> int:
    plans = [p for p in args.plans.split(",") if p]
    if len(plans) < 2:
        raise UsageError("verify needs at least two plans")
    unknown = [p for p in plans if p not in PLANS[args.query]]
    if unknown:
        raise UsageError(f"not valid for {args.query}: {', '.join(unknown)}")
    resolutions = (args.grid,) if args.grid else (None, 1, 4, 8, 16)
    for i in range(args.instances):
        seed = args.seed + i
        inst = random_instance(args.query, seed, args.max_n, args.max_k, resolutions)
        if _differs(inst, plans):
            if not args.no_shrink:
                inst = shrink(inst, lambda c: _differs(c, plans))
            where = write_instance(inst, args.out)
            sizes = ", ".join(f"|{k}|={len(v)}" for k, v in inst.relations.items())
            print(f"MISMATCH at seed {seed} ({sizes}); instance written to {where}")
            for plan, rows in _results(inst, plans).items():
                print(f"  {plan}: {len(rows)} rows")
            return EXIT_MISMATCH
    print(f"OK: {', '.join(plans)} agree on {args.instances} instances")
    return EXIT_OK


# -- bench ---------------------------------------------------------------------

QUICK = {
    "select-join-clustered": {"outer_sizes": [2_000, 4_000], "inner_n": 5_000},
    "select-join-uniform-small": {"outer_sizes": [500, 1_000], "inner_n": 5_000},
    "select-join-uniform-large": {"outer_sizes": [4_000, 8_000], "inner_n": 5_000},
    "unchained-size": {"c_sizes": [1_000, 2_000], "a_n": 1_000, "b_n": 2_000},
    "unchained-cluster-gap": {"deltas": [1, 2], "per_cluster": 200, "b_n": 2_000},
    "chained-size": {"a_sizes": [500, 1_000], "b_n": 200, "c_n": 1_000},
    "chained-clusters": {"cluster_counts": [2, 3], "a_n": 200, "per_cluster": 300, "c_n": 1_000},
    "two-select-ratio": {"exponents": [0, 1, 2], "n": 5_000, "queries": 3},
}


def cmd_bench(args: argparse.Namespace) -> int:
    overrides = QUICK[args.experiment] if args.quick else {}
    rows = bench.run_experiment(args.experiment, reps=args.reps, seed=args.seed, resolution=args.grid, **overrides)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            bench.write_csv(rows, fh)
    else:
        bench.write_csv(rows, sys.stdout)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "verify": cmd_verify, "bench": cmd_bench}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    start = time.perf_counter()
    try:
        code = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - start)
    return code


if __name__ == "__main__":
    sys.exit(main())
