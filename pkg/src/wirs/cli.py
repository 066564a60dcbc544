"""Command-line front end: ``wirs <command> ...``.

Commands: gen-data, gen-queries, verify-exact, verify-approx, bench, inspect.
Every command is deterministic given --seed; per-query streams are seeded
with ``seed ^ qid``.  WIRS_THREADS caps the worker threads used across
queries.  The exit status is 0 exactly when every check the command makes
passes.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import approx_sampler, expected_sampler, oracle, stats, workload
from .core import RandomSource
from .errors import DegenerateBins, EmptyRange, WirsError
from .geom3d import dual_planes
from .shallow_cutting import Hierarchy

SCHEMA_VERSION = 1
log = logging.getLogger("wirs")


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("WIRS_THREADS", "1")))
    except ValueError:
        return 1


def _map_queries(fn, queries):
    """Apply ``fn(qid, h)`` to every query; results keep qid order."""
    if _threads() == 1 or len(queries) < 2:
        return [fn(qid, h) for qid, h in queries]
    with ThreadPoolExecutor(_threads()) as ex:
        return list(ex.map(lambda t: fn(*t), queries))


def _write_json(path, payload) -> None:
    text = json.dumps(payload, indent=2, default=float)
    if path in (None, "-"):
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _gof(dataset, h, draws: np.ndarray, alpha: float, tv_max: float) -> dict:
    ids, probs = oracle.exact_distribution(dataset, h)
    index = {int(p): j for j, p in enumerate(ids)}
    counts = np.zeros(len(ids))
    outside = 0
    for p, c in zip(*np.unique(draws, return_counts=True)):
        j = index.get(int(p))
        if j is None:
            outside += int(c)
        else:
            counts[j] = c
    tv = stats.tv_distance(counts / len(draws), probs) + outside / len(draws) / 2
    try:
        rep = stats.chi_squared_gof(counts, probs)
        g = rep.to_dict()
    except DegenerateBins:
        g = {"statistic": None, "dof": 0, "p_value": None, "tv_distance": tv, "n_draws": len(draws)}
    g["tv_distance"] = tv
    g["outside_draws"] = outside
    g["degenerate"] = g["p_value"] is None
    g["passed"] = outside == 0 and tv <= tv_max and (g["degenerate"] or g["p_value"] > alpha)
    return g


# -- commands -----------------------------------------------------------------


def cmd_gen_data(args) -> int:
    cfg = workload.WorkloadConfig(n=args.n, weights=args.dist, umax=args.umax, points=args.points, seed=args.seed)
    ds = workload.gen_dataset(cfg.n, cfg.weights, cfg.umax, cfg.points, cfg.seed)
    workload.write_points(args.out, ds)
    log.info("wrote %d points to %s", ds.n, args.out)
    return 0


def cmd_gen_queries(args) -> int:
    ds = workload.read_points(args.points) if args.points else None
    qs = workload.gen_queries(ds, args.count, args.mode, args.m, args.seed, args.slope)
    workload.write_queries(args.out, qs)
    log.info("wrote %d queries to %s", len(qs), args.out)
    return 0


def cmd_verify_exact(args) -> int:
    ds = workload.read_points(args.points)
    queries = workload.read_queries(args.queries)
    sampler = expected_sampler.ExpectedSampler(ds, RandomSource(args.seed))
    tree = oracle.RangeSumTree(ds)

    def one(qid, h):
        rng = RandomSource(args.seed ^ qid)
        row = {"qid": qid, "range_size": int(h.contains(ds.pos).sum())}
        if row["range_size"] == 0:
            row["skipped"] = "empty range"
            return row
        row["expected"] = _gof(ds, h, sampler.sample(h, args.draws, rng), args.alpha, args.tv)
        row["range_sum"] = _gof(ds, h, tree.sample(h, args.draws, rng), args.alpha, args.tv)
        return row

    rows = _map_queries(one, queries)
    summary = {}
    ok = True
    for key in ("expected", "range_sum"):
        res = [r[key] for r in rows if key in r]
        tested = [g for g in res if not g["degenerate"]]
        rate = sum(g["passed"] for g in tested) / len(tested) if tested else 1.0
        tv_ok = all(g["tv_distance"] <= args.tv and g["outside_draws"] == 0 for g in res)
        summary[key] = {"queries": len(res), "chi2_tested": len(tested), "pass_rate": rate, "tv_ok": tv_ok}
        ok &= rate >= args.pass_rate and tv_ok
    summary["sampler_stats"] = sampler.query_stats()
    _write_json(args.report, {"schema_version": SCHEMA_VERSION, "command": "verify-exact",
                              "params": vars_clean(args), "queries": rows, "summary": summary, "passed": ok})
    return 0 if ok else 1


def cmd_verify_approx(args) -> int:
    ds = workload.read_points(args.points)
    queries = workload.read_queries(args.queries)
    eps, gamma = args.eps, args.gamma
    sampler = approx_sampler.ApproxSampler(ds, eps, gamma, RandomSource(args.seed), c_r=args.c_r)

    def one(qid, h):
        rng = RandomSource(args.seed ^ qid)
        ids, w, wh = oracle.brute_force_range(ds, h)
        row = {"qid": qid, "range_size": len(ids)}
        if len(ids) == 0:
            row["skipped"] = "empty range"
            return row
        draws, ops = sampler.sample_k(h, args.draws, rng)
        target = w / wh
        counts = np.zeros(len(ids))
        index = {int(p): j for j, p in enumerate(ids)}
        outside = 0
        for p in draws.tolist():
            j = index.get(p)
            if j is None:
                outside += 1
            else:
                counts[j] += 1
        freq = counts / args.draws
        sigma = np.sqrt(target * (1 - target) / args.draws)
        # the normal band is only meaningful for points drawn many times
        checked = target >= args.min_mass
        lo = (1 - eps) * target - 4 * sigma
        hi = (1 + eps) * target + 4 * sigma
        band_bad = int(np.sum(checked & ((freq < lo) | (freq > hi))))
        setup = sampler.setup(h)
        tail = oracle_tail_mass(sampler, setup, ids, target)
        bound = args.op_constant * sampler.op_bound(args.draws)
        row.update({
            "outside_draws": outside, "band_checked": int(checked.sum()), "band_violations": band_bad, "ignored_mass": tail,
            "ops": ops, "op_bound": bound, "passed": outside == 0 and band_bad == 0 and tail <= gamma and ops <= bound,
        })
        return row

    rows = _map_queries(one, queries)
    tiny = []
    for s, h, e in oracle.tiny_cases(args.tiny, eps, gamma, seed=args.seed):
        chk = oracle.check_enumeration(e, eps, gamma, s.n)
        chk["passed"] = chk["band_violations"] + chk["cap_violations"] + chk["rep_violations"] == 0 and chk["ignored_ok"]
        tiny.append(chk)
    ok = all(r.get("passed", True) for r in rows) and all(t["passed"] for t in tiny)
    summary = {"queries": len(rows), "failed": sum(not r.get("passed", True) for r in rows),
               "tiny_instances": len(tiny), "tiny_failed": sum(not t["passed"] for t in tiny),
               "max_op_ratio": sampler.max_ratio, "sampler_stats": sampler.query_stats()}
    _write_json(args.report, {"schema_version": SCHEMA_VERSION, "command": "verify-approx",
                              "params": vars_clean(args), "queries": rows, "tiny": tiny,
                              "summary": summary, "passed": ok})
    return 0 if ok else 1


def oracle_tail_mass(sampler, setup, ids, target) -> float:
    """Relative mass of h held by classes the approximate sampler ignores."""
    cls = sampler.partition.class_of()[ids]
    return float(target[cls >= setup.cutoff].sum())


def cmd_bench(args) -> int:
    ds = workload.read_points(args.points)
    queries = workload.read_queries(args.queries)
    t0 = time.perf_counter()
    exp = expected_sampler.ExpectedSampler(ds, RandomSource(args.seed))
    t1 = time.perf_counter()
    apx = approx_sampler.ApproxSampler(ds, args.eps, args.gamma, RandomSource(args.seed))
    t2 = time.perf_counter()
    log.info("built expected sampler in %.2fs, approximate sampler in %.2fs", t1 - t0, t2 - t1)
    rows = []
    for qid, h in queries:  # sequential so timings are comparable
        rng = RandomSource(args.seed ^ qid)
        row = {"qid": qid}
        exp.reset_stats()
        a = time.perf_counter()
        try:
            exp.sample(h, args.k, rng)
        except EmptyRange:
            continue
        b = time.perf_counter()
        st = exp.query_stats()
        _, ops = apx.sample_k(h, args.k, rng)
        c = time.perf_counter()
        row.update({"expected_seconds": b - a, "rounds": st["rounds"], "retries": st["retries"],
                    "case1_hits": st["case1_hits"], "approx_seconds": c - b, "approx_ops": ops,
                    "approx_op_ratio": ops / apx.op_bound(args.k)})
        rows.append(row)
    fields = ["qid", "expected_seconds", "rounds", "retries", "case1_hits", "approx_seconds", "approx_ops", "approx_op_ratio"]
    with open(args.report, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)
    if rows:
        rounds = sum(r["rounds"] for r in rows) / (args.k * len(rows)) if args.k else 0.0
        ratio = max(r["approx_op_ratio"] for r in rows)
        for key in ("expected_seconds", "approx_seconds"):
            v = np.array([r[key] for r in rows])
            print(f"{key}: p50={np.percentile(v, 50):.3g} p90={np.percentile(v, 90):.3g} p99={np.percentile(v, 99):.3g}")
        print(f"mean rounds per sample: {rounds:.3f}; max op ratio: {ratio:.3f}")
        ok = rounds <= 3 and ratio <= args.op_constant
    else:
        print("no non-empty queries")
        ok = True
    return 0 if ok else 1


def cmd_inspect(args) -> int:
    ds = workload.read_points(args.points)
    planes = dual_planes(ds.pos, args.orientation == "below")
    hier = Hierarchy(planes, ds.weights, RandomSource(args.seed), k_min=args.k_min)
    payload = json.loads(hier.dump())
    if args.level is not None:
        payload["levels"] = [lv for lv in payload["levels"] if lv["k"] == args.level]
    if not args.full:
        for lv in payload["levels"]:
            lv.pop("triangle_vertices", None)
    payload["schema_version"] = SCHEMA_VERSION
    payload["conflict_entries"] = hier.conflict_entries()
    payload["conflict_constant"] = hier.conflict_entries() / (ds.n * math.log2(max(ds.n, 2)))
    _write_json(args.out, payload)
    return 0


def vars_clean(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wirs", description="Weighted halfspace range sampling toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate weighted points")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--dist", choices=workload.WEIGHT_DISTS, default="loguniform")
    g.add_argument("--points", choices=workload.POINT_DISTS, default="cube")
    g.add_argument("--umax", type=float, default=1e6)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    q = sub.add_parser("gen-queries", help="generate halfspace queries")
    q.add_argument("--count", type=int, required=True)
    q.add_argument("--mode", choices=["random-halfspace", "k-range"], default="random-halfspace")
    q.add_argument("--m", type=int, default=10, help="points per query in k-range mode")
    q.add_argument("--points", help="dataset (required for k-range)")
    q.add_argument("--slope", type=float, default=1.0)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_gen_queries)

    e = sub.add_parser("verify-exact", help="chi-squared checks of the exact samplers")
    e.add_argument("--points", required=True)
    e.add_argument("--queries", required=True)
    e.add_argument("--draws", type=int, default=200_000)
    e.add_argument("--alpha", type=float, default=1e-4)
    e.add_argument("--tv", type=float, default=0.01)
    e.add_argument("--pass-rate", type=float, default=0.96)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--report", default="-")
    e.set_defaults(func=cmd_verify_exact)

    a = sub.add_parser("verify-approx", help="band, ignored-mass and op-count checks")
    a.add_argument("--points", required=True)
    a.add_argument("--queries", required=True)
    a.add_argument("--eps", type=float, default=0.25)
    a.add_argument("--gamma", type=float, default=0.025)
    a.add_argument("--c-r", type=float, default=approx_sampler.C_R)
    a.add_argument("--min-mass", type=float, default=0.05, help="band-check points with at least this share of w(h)")
    a.add_argument("--draws", type=int, default=20_000)
    a.add_argument("--op-constant", type=float, default=approx_sampler.OP_CONSTANT)
    a.add_argument("--tiny", type=int, default=20, help="enumerated tiny instances")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--report", default="-")
    a.set_defaults(func=cmd_verify_approx)

    b = sub.add_parser("bench", help="per-query timings and counters")
    b.add_argument("--points", required=True)
    b.add_argument("--queries", required=True)
    b.add_argument("--k", type=int, default=10)
    b.add_argument("--eps", type=float, default=0.25)
    b.add_argument("--gamma", type=float, default=0.025)
    b.add_argument("--op-constant", type=float, default=approx_sampler.OP_CONSTANT)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--report", required=True)
    b.set_defaults(func=cmd_bench)

    i = sub.add_parser("inspect", help="dump the level hierarchy as JSON")
    i.add_argument("--points", required=True)
    i.add_argument("--orientation", choices=["above", "below"], default="above")
    i.add_argument("--level", type=int, help="only the level with this k")
    i.add_argument("--k-min", type=int, default=32)
    i.add_argument("--full", action="store_true", help="include triangle vertices")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--out", default="-")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (WirsError, OSError) as exc:
        print(f"wirs: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
