"""Compare the compiled core against the numpy fallback.

Usage::

    python3 benchmarks/bench_backends.py [--repeat 5] [--size 200000] [--json out.json]

Each kernel is timed on identical inputs with both backends; the script also
reports the largest relative disagreement so a speedup never hides a
correctness regression.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from ymheat import _pycore

try:
    from ymheat import _core
except ImportError:  # extension not built
    _core = None


def workloads(size, seed=0):
    rng = np.random.default_rng(seed)
    x = np.ascontiguousarray(rng.uniform(0.0, 80.0, size))
    r = np.ascontiguousarray(rng.uniform(0.0, 50.0, size))
    s = np.ascontiguousarray(rng.uniform(0.0, 50.0, size))
    t = np.ascontiguousarray(rng.uniform(0.01, 20.0, size))
    m = max(size // 10, 10)
    lower = np.ascontiguousarray(-rng.uniform(0.1, 1.0, m))
    upper = np.ascontiguousarray(-rng.uniform(0.1, 1.0, m))
    diag = np.ascontiguousarray(2.5 + rng.uniform(0.0, 1.0, m))
    rhs = np.ascontiguousarray(rng.normal(size=m))
    return {
        "ive(nu=2)": lambda c: c.ive(2.0, x),
        "jv(nu=2)": lambda c: c.jv(2.0, x),
        "kernel_gamma(n=6)": lambda c: c.kernel_gamma(2.0, r, s, t),
        "solve_tridiagonal": lambda c: c.solve_tridiagonal(lower, diag, upper, rhs),
    }


def run(repeat, size):
    rows = []
    for name, fn in workloads(size).items():
        ref = fn(_pycore)
        t_py = min(timeit.repeat(lambda: fn(_pycore), number=1, repeat=repeat))
        row = {"kernel": name, "python_s": t_py, "cython_s": None, "speedup": None, "max_rel_diff": None}
        if _core is not None:
            out = fn(_core)
            scale = np.maximum(np.abs(ref), 1e-300)
            row["max_rel_diff"] = float(np.max(np.abs(out - ref) / scale))
            t_cy = min(timeit.repeat(lambda: fn(_core), number=1, repeat=repeat))
            row["cython_s"] = t_cy
            row["speedup"] = t_py / t_cy
        rows.append(row)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=200_000)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)
    rows = run(args.repeat, args.size)
    if _core is None:
        print("compiled core not available; timing the fallback only")
    print(f"{'kernel':<20}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}{'max rel diff':>14}")
    for r in rows:
        cy = f"{r['cython_s']:.4f}" if r["cython_s"] is not None else "-"
        sp = f"{r['speedup']:.1f}x" if r["speedup"] is not None else "-"
        dd = f"{r['max_rel_diff']:.1e}" if r["max_rel_diff"] is not None else "-"
        print(f"{r['kernel']:<20}{r['python_s']:>12.4f}{cy:>12}{sp:>10}{dd:>14}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"size": args.size, "repeat": args.repeat, "results": rows}, fh, indent=2,
                      sort_keys=True)
            fh.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
