"""Compiled vs pure-Python kernels.

Times the conjugate sweep on random consistent functions and full tree solves
under each available backend, checks that both backends return identical
results, and prints a table (optionally a CSV via ``--out``).

    python benchmarks/bench_kernels.py --sizes 1000,5000 --repeat 3
"""

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from treeqp import kernels
from treeqp.gen import random_path, random_tree
from treeqp.solver import solve_tree

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from fuzz import random_consistent  # noqa: E402


def best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_conjugate(n_funcs, repeat, seed=0):
    rng = np.random.default_rng(seed)
    funcs = [random_consistent(rng, max_pieces=20).arrays() for _ in range(n_funcs)]
    rows = []
    results = {}
    for backend in kernels.available_backends():
        mod = kernels.backend_module(backend)
        sec, out = best_of(lambda: [mod.conjugate(*f, 1.0, True) for f in funcs], repeat)
        results[backend] = out
        rows.append({"case": f"conjugate x{n_funcs}", "backend": backend, "seconds": sec})
    return rows, results


def bench_solve(kind, n, repeat, seed=0):
    inst = (random_tree if kind == "random-tree" else random_path)(n, seed)
    rows = []
    results = {}
    prev = kernels.BACKEND
    try:
        for backend in kernels.available_backends():
            kernels.use_backend(backend)
            sec, sol = best_of(lambda: solve_tree(inst), repeat)
            results[backend] = sol
            rows.append({"case": f"{kind} n={n}", "backend": backend, "seconds": sec})
    finally:
        kernels.use_backend(prev)
    return rows, results


def _identical(results, key):
    vals = [key(v) for v in results.values()]
    return all(np.array_equal(np.asarray(vals[0], dtype=object), np.asarray(v, dtype=object))
               for v in vals[1:])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1000,5000")
    ap.add_argument("--funcs", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)

    if "cython" not in kernels.available_backends():
        print("compiled kernels are not built; only the Python backend is timed")
    rows, res = bench_conjugate(args.funcs, args.repeat)
    agree = [_identical(res, lambda out: [tuple(map(tuple, o)) for o in out])]
    for kind in ("random-tree", "path"):
        for n in (int(s) for s in args.sizes.split(",")):
            r, res = bench_solve(kind, n, args.repeat)
            rows += r
            agree.append(_identical(res, lambda s: (s.objective, *s.x)))

    base = {r["case"]: r["seconds"] for r in rows if r["backend"] == "python"}
    print(f"{'case':<24}{'backend':<10}{'seconds':>10}{'speedup':>9}")
    for r in rows:
        r["speedup"] = base[r["case"]] / r["seconds"]
        print(f"{r['case']:<24}{r['backend']:<10}{r['seconds']:>10.4f}{r['speedup']:>8.2f}x")
    print("backends agree:", all(agree))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=("case", "backend", "seconds", "speedup"))
            w.writeheader()
            w.writerows(rows)
    return 0 if all(agree) else 1


if __name__ == "__main__":
    sys.exit(main())
