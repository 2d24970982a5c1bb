"""Command-line front end: ``treeqp {solve,gen,ghmm,ghmm-online,bench}``.

Exit codes: 0 on success, 1 on bad input (unreadable or invalid files, bad
flag combinations, shape errors), 2 when ``solve --check`` finds a mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import gen, ghmm
from .baselines import brute_force_solve, direct_dp_path
from .errors import TreeQPError
from .solver import SolveOptions, evaluate_objective, is_feasible, solve_tree
from .tree import TreeInstance

CHECK_MAX_BRUTE = 14
CHECK_TOL = 1e-6
BENCH_FIELDS = ("n", "seed", "method", "time_ms", "objective", "pieces_mean", "pieces_max",
                "nz_fraction", "slope")
TIMING_FIELDS = ("step", "horizon", "time_ms", "objective_miqp", "x_last")
THREADS_ENV = "TREEQP_BENCH_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors share exit code 1 with other bad input; 2 is reserved for --check
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _close(a: float, b: float, tol: float = CHECK_TOL) -> bool:
    return abs(a - b) <= tol * (1.0 + abs(b))


# --- solve ------------------------------------------------------------------

def _run_method(inst: TreeInstance, method: str, opts: SolveOptions):
    if method == "parametric":
        return solve_tree(inst, opts)
    t0 = time.perf_counter()
    sol = direct_dp_path(inst) if method == "path-dp" else brute_force_solve(inst)
    sol.stats["time_ms"] = (time.perf_counter() - t0) * 1e3
    return sol


def check_solution(inst: TreeInstance, sol) -> list[str]:
    """Problems found when re-verifying ``sol``; empty when it checks out."""
    problems = []
    if not is_feasible(sol.x, sol.z):
        return ["solution is infeasible (nonzero x with z = 0, or non-finite x)"]
    direct = evaluate_objective(inst, sol.x, sol.z)
    if not _close(sol.objective, direct):
        problems.append(f"reported objective {sol.objective!r} != direct evaluation {direct!r}")
    if inst.n <= CHECK_MAX_BRUTE:
        ref = brute_force_solve(inst).objective
        if not _close(sol.objective, ref):
            problems.append(f"objective {sol.objective!r} != brute force optimum {ref!r}")
    return problems


def cmd_solve(args) -> int:
    inst = TreeInstance.load(args.input)
    if args.no_clip and args.clip is not None:
        raise UsageError("--no-clip and --clip are mutually exclusive")
    opts = SolveOptions(clip=False if args.no_clip else None, clip_M=args.clip, root=args.root)
    sol = _run_method(inst, args.method, opts)
    if args.output:
        sol.save(args.output)
    print(f"objective {sol.objective:.12g}  nonzeros {int(np.count_nonzero(sol.x))}/{inst.n}  "
          f"time {sol.stats['time_ms']:.3f} ms")
    if args.check:
        problems = check_solution(inst, sol)
        for msg in problems:
            print(f"check failed: {msg}", file=sys.stderr)
        if problems:
            return 2
        print("check passed")
    return 0


# --- gen --------------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.kind == "extended-star":
        if args.branches is None or args.length is None:
            raise UsageError("--kind extended-star needs --branches and --length")
        if args.n is not None:
            raise UsageError("--n does not apply to --kind extended-star")
    else:
        if args.branches is not None or args.length is not None:
            raise UsageError(f"--branches/--length do not apply to --kind {args.kind}")
        if args.n is None:
            raise UsageError(f"--kind {args.kind} needs --n")
    inst = gen.generate(args.kind, args.seed, n=args.n, branches=args.branches, length=args.length,
                        lambda_bar=args.lam)
    inst.save(args.out)
    print(f"wrote {args.kind} instance with n={inst.n} to {args.out}")
    return 0


# --- ghmm -------------------------------------------------------------------

def _ghmm_params(args) -> ghmm.GhmmParams:
    return ghmm.GhmmParams(sigma2=args.sigma2, nu2=args.nu2, lambda_w=args.lambda_w,
                           gamma_x=args.gamma_x, K=args.window, sigma2_initial=args.sigma2_initial)


def _read_obs(args):
    header = None if args.header is None else args.header
    return ghmm.read_observations(args.obs, header=header)


def cmd_ghmm(args) -> int:
    p = _ghmm_params(args)
    y = _read_obs(args)
    t0 = time.perf_counter()
    sol = ghmm.solve_batch(y, p)
    elapsed = time.perf_counter() - t0
    if args.out:
        sol.save(args.out)
    print(f"T={len(sol.x)} outliers={len(sol.outliers)} active states={int(sol.s.sum())} "
          f"objective {sol.objective_model:.10g}  time {elapsed:.3f} s")
    return 0


def cmd_ghmm_online(args) -> int:
    p = _ghmm_params(args)
    y = _read_obs(args)
    S = args.recent
    st = ghmm.online_init(p, history=max(S, 1), clip_M=args.clip)
    rows, latest = [], []
    suffix, obj = np.zeros(0), 0.0
    for k, window in enumerate(ghmm.windows(y, p.K)):
        t0 = time.perf_counter()
        suffix, obj = ghmm.online_step(st, window, S)
        ms = (time.perf_counter() - t0) * 1e3
        latest.append(float(suffix[-1]))
        rows.append((k, st.horizon, f"{ms:.6f}", repr(float(obj)), repr(float(suffix[-1]))))
    if args.timing:
        with open(args.timing, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TIMING_FIELDS)
            w.writerows(rows)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"horizon": st.horizon, "x_latest": latest,
                       "suffix": [float(v) for v in suffix],
                       "objective_miqp": float(obj), "objective_model": float(obj + st.constant)},
                      fh, indent=1)
            fh.write("\n")
    times = np.array([float(r[2]) for r in rows])
    print(f"steps {len(rows)}  median {np.median(times):.3f} ms  max {times.max():.3f} ms  "
          f"objective {obj + st.constant:.10g}")
    return 0


# --- bench ------------------------------------------------------------------

def _bench_instance(kind: str, n: int, seed: int, lam: float, branches: int) -> TreeInstance:
    if kind == "extended-star":
        return gen.extended_star(branches, max(1, (n - 1) // branches), seed, lam)
    return gen.generate(kind, seed, n=n, lambda_bar=lam)


def _bench_one(job):
    kind, n, seed, method, lam, branches = job
    inst = _bench_instance(kind, n, seed, lam, branches)
    sol = _run_method(inst, method, SolveOptions())
    return {
        "n": inst.n, "seed": seed, "method": method, "time_ms": sol.stats["time_ms"],
        "objective": sol.objective, "pieces_mean": sol.stats["pieces_mean"],
        "pieces_max": sol.stats["pieces_max"], "nz_fraction": float(np.count_nonzero(sol.x)) / inst.n,
        "slope": "",
    }


def loglog_slope(sizes, times) -> float:
    """Least-squares slope of ``log(time)`` against ``log(n)``."""
    sizes = np.asarray(sizes, dtype=float)
    times = np.asarray(times, dtype=float)
    if len(sizes) < 2 or np.any(times <= 0):
        return float("nan")
    return float(np.polyfit(np.log(sizes), np.log(times), 1)[0])


def run_bench(sizes, trials, methods, kind, seed=0, lam=gen.DEFAULT_LAMBDA, branches=8, threads=1):
    jobs = [(kind, n, seed + t, m, lam, branches) for n in sizes for t in range(trials) for m in methods]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            records = list(ex.map(_bench_one, jobs))
    else:
        records = [_bench_one(j) for j in jobs]
    rows = []
    for m in methods:
        mine = [r for r in records if r["method"] == m]
        ns = sorted({r["n"] for r in mine})
        means = [float(np.mean([r["time_ms"] for r in mine if r["n"] == n])) for n in ns]
        slope = loglog_slope(ns, means)
        for n, mean in zip(ns, means):
            group = [r for r in mine if r["n"] == n]
            rows.extend(sorted(group, key=lambda r: r["seed"]))
            rows.append({
                "n": n, "seed": "mean", "method": m, "time_ms": mean,
                "objective": float(np.mean([r["objective"] for r in group])),
                "pieces_mean": float(np.mean([r["pieces_mean"] for r in group])),
                "pieces_max": int(max(r["pieces_max"] for r in group)),
                "nz_fraction": float(np.mean([r["nz_fraction"] for r in group])),
                "slope": slope,
            })
    return rows


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in ("parametric", "path-dp", "brute"):
            raise UsageError(f"unknown method {m!r}")
    if "path-dp" in methods and args.kind != "path":
        raise UsageError("path-dp needs --kind path")
    threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    rows = run_bench(sizes, args.trials, methods, args.kind, args.seed, args.lam, args.branches, threads)
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_FIELDS)
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        if r["seed"] == "mean":
            print(f"{r['method']:>10} n={r['n']:>6}  mean {r['time_ms']:10.2f} ms  "
                  f"pieces {r['pieces_mean']:.2f}  slope {r['slope']:.3f}")
    return 0


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="treeqp", description="Exact solver for tree-structured quadratic problems "
                                            "with indicator variables.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve an instance file")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("parametric", "path-dp", "brute"), default="parametric")
    p.add_argument("--no-clip", action="store_true", help="disable breakpoint clipping")
    p.add_argument("--clip", type=float, default=None, metavar="M", help="clip with a given bound")
    p.add_argument("--root", type=int, default=None)
    p.add_argument("--check", action="store_true",
                   help=f"re-evaluate the objective (and brute force when n <= {CHECK_MAX_BRUTE})")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("gen", help="generate a synthetic instance")
    p.add_argument("--kind", choices=("random-tree", "path", "extended-star"), required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--branches", type=int, default=None)
    p.add_argument("--length", type=int, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=gen.DEFAULT_LAMBDA)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    for name, func in (("ghmm", cmd_ghmm), ("ghmm-online", cmd_ghmm_online)):
        p = sub.add_parser(name, help="robust GHMM smoothing" + (" (online)" if func is cmd_ghmm_online else ""))
        p.add_argument("--obs", required=True, help="CSV with one observation per line")
        hdr = p.add_mutually_exclusive_group()
        hdr.add_argument("--header", dest="header", action="store_true", default=None,
                         help="first line is a header")
        hdr.add_argument("--no-header", dest="header", action="store_false")
        p.add_argument("--window", type=int, default=10)
        p.add_argument("--sigma2", type=float, default=2.0)
        p.add_argument("--sigma2-initial", type=float, default=None)
        p.add_argument("--nu2", type=float, default=1.0)
        p.add_argument("--lambda-w", type=float, default=100.0)
        p.add_argument("--gamma-x", type=float, default=400.0)
        p.add_argument("--out", default=None)
        if func is cmd_ghmm_online:
            p.add_argument("--recent", type=int, default=5, metavar="S")
            p.add_argument("--timing", default=None, help="per-step timing CSV")
            p.add_argument("--clip", type=float, default=None, metavar="M")
        p.set_defaults(func=func)

    p = sub.add_parser("bench", help=f"timing harness (workers from ${THREADS_ENV})")
    p.add_argument("--sizes", default="200,500,1000,2000,5000")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--methods", default="parametric")
    p.add_argument("--kind", choices=("random-tree", "path", "extended-star"), default="random-tree")
    p.add_argument("--branches", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lam", type=float, default=gen.DEFAULT_LAMBDA)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TreeQPError, UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
