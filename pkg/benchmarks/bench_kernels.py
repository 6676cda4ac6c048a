"""Compiled vs pure-Python kernel timings.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

import argparse
import json
import math
import sys
import timeit

import numpy as np

from okl import _pykernels as py
from okl.kernels import compiled_kernels


def gillespie_case(n_events=200_000, n_sites=8):
    uniforms = np.random.default_rng(0).random(2 * n_events)

    def run(mod):
        out_s = np.empty(n_events, dtype=np.int64)
        out_t = np.empty(n_events, dtype=np.float64)
        counters = np.zeros(4, dtype=np.int64)
        mod.gillespie_block(0, 0.0, n_sites, 1.0, 0.2, 0.7, 0.1, 0.35, 1e18, uniforms, out_s, out_t, counters)
    return f"gillespie_block ({n_events} events, N={n_sites})", run


def hn_case(n_paths=100_000, n_steps=64):
    rng = np.random.default_rng(1)
    start = rng.integers(1, 40, size=n_paths).astype(np.int64)
    steps = rng.choice(np.array([-1, 0, 0, 1], dtype=np.int8), size=(n_paths, n_steps))
    out_log = np.empty(n_paths)
    out_end = np.empty(n_paths, dtype=np.int64)

    def run(mod):
        mod.hn_log_weights(start, steps, -2.0 / math.sqrt(n_steps), out_log, out_end)
    return f"hn_log_weights ({n_paths} walks x {n_steps} steps)", run


def riemann_case(n_paths=20_000, n_grid=1024):
    inc = np.random.default_rng(2).normal(0.0, math.sqrt(0.5 / n_grid), size=(n_paths, n_grid))
    out_i = np.empty(n_paths)
    out_e = np.empty(n_paths)

    def run(mod):
        mod.riemann_exp_integral(inc, 1.0 / n_grid, out_i, out_e)
    return f"riemann_exp_integral ({n_paths} paths x {n_grid})", run


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--quick", action="store_true", help="smaller problem sizes")
    parser.add_argument("--json", help="write results here")
    args = parser.parse_args(argv)
    ck = compiled_kernels()
    if ck is None:
        print("compiled extension not built; only the Python timings are meaningful", file=sys.stderr)
    scale = 10 if args.quick else 1
    cases = [gillespie_case(200_000 // scale), hn_case(100_000 // scale), riemann_case(20_000 // scale)]
    rows = []
    print(f"{'kernel':48s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s}")
    for label, run in cases:
        t_py = min(timeit.repeat(lambda: run(py), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: run(ck), number=1, repeat=args.repeat)) if ck else float("nan")
        rows.append({"kernel": label, "python_s": t_py, "compiled_s": t_c, "speedup": t_py / t_c})
        print(f"{label:48s} {t_py:11.4f} {t_c:13.4f} {t_py / t_c:8.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
