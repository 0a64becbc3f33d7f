"""Benchmark the compiled kernels against the pure-Python fallback.

Runs each hot kernel on both backends with the same seed, checks the
outputs are identical, and prints the speedup.  Invoke from the repo
root:

    python benchmarks/bench_kernels.py --repeats 3
"""

import argparse
import time

import numpy as np

from condlaw._kernels import _pykernels
from condlaw.seeds import derive_seed

try:
    from condlaw._kernels import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def _workloads(seed):
    rng = np.random.default_rng(derive_seed(seed, 0, 0))
    m, n = 512, 400
    tables = rng.integers(1, m + 1, size=(200, n)).astype(np.int64)
    sizes, _ = _pykernels.sample_borel_batch(
        0.35, 5000, 80, np.random.default_rng(derive_seed(seed, 0, 1))
    )
    sizes = np.asarray(sizes, dtype=np.int64)

    def insert(impl):
        return [int(impl.insert_displacements(m, row)[3]) for row in tables]

    def enumerate_counts(impl):
        counts, visited = impl.enumerate_displacement_counts(7)
        return (counts.tolist(), visited)

    def borel(impl):
        r = np.random.default_rng(derive_seed(seed, 1, 0))
        draws, truncated = impl.sample_borel_batch(0.3, 300_000, 400, r)
        return (draws.tolist(), truncated)

    def pairs(impl):
        r = np.random.default_rng(derive_seed(seed, 1, 1))
        x, y, truncated = impl.sample_pair_batch(0.3, 100_000, 400, r)
        return (x.tolist(), y.tolist(), truncated)

    def displacements(impl):
        r = np.random.default_rng(derive_seed(seed, 1, 2))
        return impl.sample_displacements_for_sizes(sizes, r).tolist()

    return [
        ("insert_displacements (200 x n=400)", insert),
        ("enumerate_displacement_counts (n=7)", enumerate_counts),
        ("sample_borel_batch (3e5)", borel),
        ("sample_pair_batch (1e5)", pairs),
        ("sample_displacements_for_sizes (5e3 blocks)", displacements),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3, help="timing repeats, best-of")
    parser.add_argument("--seed", type=int, default=2026, help="workload seed")
    args = parser.parse_args(argv)

    if _ckernels is None:
        parser.error("compiled backend unavailable; build the extension first")

    print(f"{'kernel':<45} {'python_s':>10} {'cython_s':>10} {'speedup':>8}  match")
    for label, work in _workloads(args.seed):
        t_py, out_py = _time(lambda: work(_pykernels), args.repeats)
        t_cy, out_cy = _time(lambda: work(_ckernels), args.repeats)
        match = "yes" if out_py == out_cy else "NO"
        print(f"{label:<45} {t_py:>10.4f} {t_cy:>10.4f} {t_py / t_cy:>7.1f}x  {match}")
        if match == "NO":
            raise SystemExit(f"backend outputs differ on {label}")


if __name__ == "__main__":
    main()
