"""Compare the numba and numpy kernels, then time a full evaluation on each backend.

    python3 benchmarks/bench_kernels.py [--repeat N]

Compiled kernels are warmed up before timing, so compilation cost is excluded
from the kernel table and reported separately.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time
import timeit

import numpy as np

from sunny_portfolio import _kernels

EVAL_SNIPPET = """
import time
from sunny_portfolio import BACKEND
from sunny_portfolio.core import SunnyConfig
from sunny_portfolio.evaluation import elect_backup, make_folds, run_sunny_eval, compose_portfolio
from sunny_portfolio.synthetic import SyntheticSpec, generate
kb, _ = generate(SyntheticSpec(instances=600, solvers=10, clusters=6, seed=1))
t0 = time.perf_counter()
spec = compose_portfolio(kb, 6)
cfg = SunnyConfig(16, kb.timeout, elect_backup(kb, spec.solvers), spec.solvers)
rep = run_sunny_eval(kb, cfg, make_folds(kb, 5, 5, 0))
print(BACKEND, f"{time.perf_counter() - t0:.3f}", f"{float(rep.mean_psi):.6f}")
"""


def _best(fn, repeat: int) -> float:
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def kernel_table(repeat: int) -> None:
    rng = np.random.default_rng(0)
    print(f"{'kernel':<34}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for n, d in ((1000, 20), (5000, 50), (50000, 100)):
        train = rng.normal(size=(n, d))
        q = rng.normal(size=d)
        a = _best(lambda: _kernels.numpy_sq_distances(train, q), repeat)
        b = _best(lambda: _kernels._sq_distances(train, q), repeat)
        print(f"{f'sq_distances n={n} d={d}':<34}{a * 1e3:>12.3f}{b * 1e3:>12.3f}{a / b:>9.1f}x")
    for n, m, size in ((16, 11, 5), (500, 14, 7), (4000, 16, 8)):
        solved = rng.random((n, m)) < 0.2
        masks = (solved * (1 << np.arange(m))).sum(axis=1).astype(np.int64)
        cost = rng.integers(0, 10**6, size=m)
        cand = np.ascontiguousarray(_kernels.combination_masks(m, size))
        a = _best(lambda: _kernels.numpy_evaluate_subsets(masks, cost, cand), repeat)
        b = _best(lambda: _kernels._evaluate_subsets(masks, cost, cand), repeat)
        label = f"evaluate_subsets n={n} C({m},{size})"
        print(f"{label:<34}{a * 1e3:>12.3f}{b * 1e3:>12.3f}{a / b:>9.1f}x")


def end_to_end() -> None:
    print("\nend-to-end: compose m=6 of 10 + 5x5 CV SUNNY on 600 instances (fresh process)")
    for flag in ("0", "1"):
        env = dict(os.environ, SUNNY_DISABLE_NUMBA=flag)
        t0 = time.perf_counter()
        out = subprocess.run([sys.executable, "-c", EVAL_SNIPPET], env=env, capture_output=True, text=True, check=True)
        backend, inner, psi = out.stdout.split()
        print(f"  {backend:<6} eval {float(inner):7.3f}s  process {time.perf_counter() - t0:7.3f}s  PSI {psi}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels.BACKEND != "numba":
        sys.exit("numba is unavailable or disabled; nothing to compare")
    t0 = time.perf_counter()
    _kernels._sq_distances(np.zeros((2, 2)), np.zeros(2))
    _kernels._evaluate_subsets(np.zeros(2, np.int64), np.zeros(2, np.int64), np.zeros(2, np.int64))
    print(f"numba warm-up (compile or cache load): {time.perf_counter() - t0:.3f}s\n")
    kernel_table(args.repeat)
    end_to_end()


if __name__ == "__main__":
    main()
