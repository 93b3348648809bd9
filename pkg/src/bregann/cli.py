"""Command-line interface: build, query, estimate, bench.

All outputs are JSON on stdout; diagnostics go to stderr. Exit codes:
0 success, 2 input parse error, 3 domain violation, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import struct
import sys
import time
from typing import List, Optional

import numpy as np

from .ann_index import BuildParams, build_index, exact_nn, load_index, save_index
from .divergence import DivergenceSpec, DomainBox, Kind, Side
from .errors import BregannError, DomainViolation, FastPathUnavailable
from .generators import generator_by_name

EXIT_PARSE = 2
EXIT_DOMAIN = 3
EXIT_IO = 4


class ParseFailure(Exception):
    pass


def _load_points(path: str, no_header: bool) -> np.ndarray:
    """CSV (optional header) or raw f64le with a u32 n, u32 d prefix."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(8)
            rest = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    if path.endswith(".bin") or path.endswith(".f64"):
        if len(head) < 8:
            raise ParseFailure(f"{path}: binary file too short for n,d prefix")
        n, d = struct.unpack("<II", head)
        data = np.frombuffer(rest, dtype="<f8")
        if data.size != n * d:
            raise ParseFailure(
                f"{path}: expected {n * d} float64 values, found {data.size}"
            )
        return data.reshape(n, d).copy()
    text = (head + rest).decode("utf-8", errors="strict")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseFailure(f"{path}: no data rows")
    start = 0
    if not no_header:
        try:
            [float(tok) for tok in lines[0].split(",")]
        except ValueError:
            start = 1
    rows = []
    for ln_no, ln in enumerate(lines[start:], start=start + 1):
        try:
            rows.append([float(tok) for tok in ln.split(",")])
        except ValueError as exc:
            raise ParseFailure(f"{path}:{ln_no}: {exc}") from exc
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ParseFailure(f"{path}: ragged rows (widths {sorted(widths)})")
    return np.asarray(rows, dtype=float)


def _parse_domain(text: str, d_hint: Optional[int] = None) -> DomainBox:
    try:
        blob = json.loads(text)
        lo = np.asarray(blob["lo"], dtype=float)
        hi = np.asarray(blob["hi"], dtype=float)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseFailure(f'bad --domain (expected {{"lo":[...],"hi":[...]}}): {exc}')
    if d_hint is not None and lo.size == 1 and d_hint > 1:
        lo = np.repeat(lo, d_hint)
        hi = np.repeat(hi, d_hint)
    return DomainBox(lo, hi)


def _spec_from_args(args, dim: int) -> DivergenceSpec:
    domain = _parse_domain(args.domain, d_hint=dim)
    if domain.dim != dim:
        raise ParseFailure(f"domain is {domain.dim}-dimensional, data is {dim}")
    kind = Kind.PRIMAL if args.primal else Kind.SYMMETRIZED
    gens = [generator_by_name(args.divergence) for _ in range(dim)]
    return DivergenceSpec(gens, domain, kind, args.sqrt, Side(args.side))


def _seed_from_args(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("BANN_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ParseFailure(f"BANN_SEED={env!r} is not an integer")
    return 0


def _emit(obj):
    print(json.dumps(obj, sort_keys=True))


def cmd_build(args) -> int:
    points = _load_points(args.input, args.no_header)
    spec = _spec_from_args(args, points.shape[1])
    seed = _seed_from_args(args)
    params = BuildParams(seed=seed, samples=args.samples, fast_path=not args.no_fast_path)
    index = build_index(points, spec, params)
    nbytes = save_index(index, args.output)
    _emit({
        "n": index.n,
        "d": index.spec.dim,
        "mu": index.constants.mu,
        "c0": index.constants.c0,
        "ring_depth": index.ring.depth,
        "bytes": nbytes,
        "fast_path": index.equad is not None,
        "seed": seed,
    })
    return 0


def _iter_queries(args) -> np.ndarray:
    if args.query is not None:
        try:
            vec = [float(tok) for tok in args.query.split(",")]
        except ValueError as exc:
            raise ParseFailure(f"bad --query vector: {exc}")
        return np.asarray([vec], dtype=float)
    if args.queries is not None:
        return _load_points(args.queries, args.no_header)
    raise ParseFailure("provide --query or --queries")


def cmd_query(args) -> int:
    index = load_index(args.index)
    queries = _iter_queries(args)
    answers = []
    for q in queries:
        entry = {}
        try:
            pid, dist, stats = index.query(q, args.eps, strategy=args.strategy)
            entry["id"] = int(pid)
            entry["distance"] = dist
            if args.verify:
                _, exact = exact_nn(index.points, index.spec, q)
                entry["ratio"] = dist / exact if exact > 0 else 1.0
            if args.stats:
                entry["stats"] = {
                    "cells_expanded": stats.cells_expanded,
                    "max_depth": stats.max_depth,
                    "witness_queries": stats.witness_queries,
                    "distance_evals": stats.distance_evals,
                    "strategy": stats.strategy,
                }
        except DomainViolation as exc:
            entry["id"] = None
            entry["distance"] = None
            entry["error"] = str(exc)
        answers.append(entry)
    _emit(answers)
    return 0


def cmd_estimate(args) -> int:
    from .divergence import estimate_constants

    domain = _parse_domain(args.domain)
    kind = Kind.PRIMAL if args.primal else Kind.SYMMETRIZED
    gens = [generator_by_name(args.divergence) for _ in range(domain.dim)]
    spec = DivergenceSpec(gens, domain, kind, args.sqrt, Side(args.side))
    seed = _seed_from_args(args)
    # raw kinds report the rooted twin's mu (the raw defect constant is
    # unbounded); c0 is flavor-independent
    constants = estimate_constants(spec, samples=args.samples, seed=seed)
    _emit({"mu": constants.mu, "c0": constants.c0, "samples": args.samples,
           "seed": seed})
    return 0


def _bench_one(index, queries, eps, strategy):
    cells, witness, times = [], [], []
    for q in queries:
        t0 = time.perf_counter()
        _, _, stats = index.query(q, eps, strategy=strategy)
        times.append(time.perf_counter() - t0)
        cells.append(stats.cells_expanded)
        witness.append(stats.witness_queries)
    return {
        "eps": eps,
        "strategy": strategy,
        "queries": len(queries),
        "cells_expanded_mean": float(np.mean(cells)),
        "cells_expanded_median": float(np.median(cells)),
        "witness_queries_mean": float(np.mean(witness)),
        "wall_time_mean_s": float(np.mean(times)),
    }


def cmd_bench(args) -> int:
    index = load_index(args.index)
    seed = _seed_from_args(args)
    rng = np.random.default_rng(seed)
    lo, hi = index.spec.domain.lo, index.spec.domain.hi
    queries = rng.uniform(lo, hi, size=(args.queries, index.spec.dim))
    eps_list = [float(tok) for tok in args.eps.split(",")] if args.eps else [0.25]
    strategies = args.strategy.split(",")
    table = []
    if args.queries > 0:
        for eps in eps_list:
            for strat in strategies:
                try:
                    table.append(_bench_one(index, queries, eps, strat))
                except FastPathUnavailable:
                    continue
    result = {"table": table}
    if args.sizes:
        sizes = [int(tok) for tok in args.sizes.split(",")]
        sweep = []
        for n_sub in sizes:
            if n_sub > index.n:
                continue
            sub = build_index(index.points[:n_sub], index.spec, index.params)
            row = _bench_one(sub, queries, eps_list[0], strategies[0])
            row["n"] = n_sub
            sweep.append(row)
        if len(sweep) >= 2:
            xs = np.log2([row["n"] for row in sweep])
            ys = np.array([row["cells_expanded_mean"] for row in sweep])
            slope, intercept = np.polyfit(xs, ys, 1)
            pred = slope * xs + intercept
            ss_res = float(np.sum((ys - pred) ** 2))
            ss_tot = float(np.sum((ys - np.mean(ys)) ** 2))
            result["sweep"] = sweep
            result["slope_cells_vs_log2n"] = float(slope)
            result["r_squared"] = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    _emit(result)
    return 0


def _add_spec_flags(p):
    p.add_argument("--divergence", required=True,
                   choices=["sqeuclidean", "kl", "itakura-saito"])
    group = p.add_mutually_exclusive_group()
    group.add_argument("--symmetrized", dest="primal", action="store_false",
                       help="symmetrized divergence (default)")
    group.add_argument("--primal", dest="primal", action="store_true",
                       help="asymmetric divergence")
    p.set_defaults(primal=False)
    p.add_argument("--sqrt", action="store_true",
                   help="use the square-rooted distance")
    p.add_argument("--side", choices=["left", "right"], default="right")
    p.add_argument("--domain", required=True,
                   help='JSON {"lo": [...], "hi": [...]}')


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bregann",
        description="Approximate nearest-neighbor search for decomposable "
                    "Bregman divergences",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build and save an index")
    b.add_argument("input", help="points file (.csv, or .bin/.f64 with n,d prefix)")
    b.add_argument("output", help="index file to write")
    _add_spec_flags(b)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--samples", type=int, default=20000)
    b.add_argument("--no-header", action="store_true")
    b.add_argument("--no-fast-path", action="store_true")
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="query a saved index")
    q.add_argument("index")
    q.add_argument("--query", help="comma-separated query vector")
    q.add_argument("--queries", help="file of query points")
    q.add_argument("--eps", type=float, default=0.1)
    q.add_argument("--strategy", choices=["auto", "generic", "fast"], default="auto")
    q.add_argument("--verify", action="store_true",
                   help="report the ratio against the in-process exact scan")
    q.add_argument("--stats", action="store_true")
    q.add_argument("--no-header", action="store_true")
    q.set_defaults(func=cmd_query)

    e = sub.add_parser("estimate", help="estimate mu and c0 for a divergence/domain")
    _add_spec_flags(e)
    e.add_argument("--samples", type=int, default=20000)
    e.add_argument("--seed", type=int, default=None)
    e.set_defaults(func=cmd_estimate)

    n = sub.add_parser("bench", help="measure query counters on an index")
    n.add_argument("index")
    n.add_argument("--queries", type=int, default=100)
    n.add_argument("--eps", default="0.25", help="comma-separated eps values")
    n.add_argument("--strategy", default="auto", help="comma-separated strategies")
    n.add_argument("--sizes", default=None,
                   help="comma-separated n values for a size sweep")
    n.add_argument("--seed", type=int, default=None)
    n.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags, which matches the parse-error code
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ParseFailure as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DomainViolation as exc:
        rows = f" rows={exc.rows[:20]}" if exc.rows else ""
        print(f"domain violation: {exc}{rows}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ValueError, BregannError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
