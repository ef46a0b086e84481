"""Time the compiled kernels against the numpy fallback on identical inputs.

Usage: python benchmarks/bench_kernels.py [--repeat R] [--json]

Both backends consume the same bit-generator streams, so every case also
checks that their outputs agree before reporting the speedup.
"""
import argparse
import json
import sys
import time

import numpy as np

from iidcast import _pykernels
from iidcast.mobility import make_config
from iidcast.rng import bit_generator, generator, trial_bit_generators
from iidcast.schemes import poisson_arrivals

try:
    from iidcast import _kernels
except ImportError:  # extension not built
    _kernels = None


def flood_case(n, alpha, trials):
    cfg = make_config(n, alpha)

    def run(mod):
        return mod.flood_times(trial_bit_generators(1, 0, trials), n, cfg.cell_count, 1_000_000)
    return f"flood_times N={n} alpha={alpha} trials={trials}", run


def fcfs_case(n, alpha, u, horizon):
    cfg = make_config(n, alpha)
    gen = generator(2, 1)
    arrival = poisson_arrivals(0.5 / u, horizon, gen)
    source = gen.integers(0, n, size=arrival.size, dtype=np.int64)

    def run(mod):
        return mod.fcfs_run(bit_generator(2, 0), n, cfg.cell_count, u, horizon, arrival, source, u)
    return f"fcfs_run N={n} alpha={alpha} U={u} slots={horizon}", run


def single_hop_case(n, alpha, horizon):
    cfg = make_config(n, alpha)
    gen = generator(3, 1)
    arrival_slot = np.floor(poisson_arrivals(n * 0.005, horizon, gen)).astype(np.int64)
    source = gen.integers(0, n, size=arrival_slot.size, dtype=np.int64)
    order = np.argsort(source, kind="stable").astype(np.int64)
    offsets = np.concatenate(([0], np.cumsum(np.bincount(source, minlength=n)))).astype(np.int64)

    def run(mod):
        return mod.single_hop_run(bit_generator(3, 0), n, cfg.cell_count, horizon, 0, arrival_slot,
                                  source, offsets, order, 0, 1, 1000)
    return f"single_hop_run N={n} alpha={alpha} slots={horizon}", run


CASES = [
    lambda: flood_case(100, 1.5, 200),
    lambda: flood_case(50, 0.5, 2000),
    lambda: fcfs_case(50, 1.5, 98, 100_000),
    lambda: single_hop_case(20, 1.0, 50_000),
]


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation`",
              file=sys.stderr)
        return 2
    results = []
    for make in CASES:
        name, run = make()
        t_cy, out_cy = best_of(lambda: run(_kernels), args.repeat)
        t_py, out_py = best_of(lambda: run(_pykernels), args.repeat)
        results.append({"case": name, "cython_s": t_cy, "python_s": t_py,
                        "speedup": t_py / t_cy, "identical": _same(out_cy, out_py)})
    if args.json:
        print(json.dumps(results, indent=2))
    else:
        width = max(len(r["case"]) for r in results)
        print(f"{'case':<{width}}  {'cython s':>9}  {'python s':>9}  {'speedup':>8}  identical")
        for r in results:
            print(f"{r['case']:<{width}}  {r['cython_s']:9.4f}  {r['python_s']:9.4f}  "
                  f"{r['speedup']:7.1f}x  {r['identical']}")
    return 0 if all(r["identical"] for r in results) else 2


if __name__ == "__main__":
    sys.exit(main())
