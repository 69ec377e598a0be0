"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel is run on the same inputs under both backends; outputs are
compared before timing so a speedup is never reported for a wrong answer.
"""

import argparse
import time

import numpy as np

from evmlime import _core_py
from evmlime.classify import pack_bits

try:
    from evmlime import _core
except ImportError:
    _core = None


def _best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    code = rng.integers(0, 256, size=2_000_000, dtype=np.uint8).tobytes()
    values = np.sort(rng.poisson(20, size=200_000).astype(np.float64))
    codes = rng.integers(0, 2, size=values.size).astype(np.int64)
    train = pack_bits(rng.integers(0, 2, size=(5000, 72)))
    labels = rng.integers(0, 2, size=5000).astype(np.uint8)
    queries = pack_bits(rng.integers(0, 2, size=(1000, 72)))
    return {
        "sweep_histogram (2 MB bytecode)": lambda m: m.sweep_histogram(code),
        "sweep_offsets (2 MB bytecode)": lambda m: m.sweep_offsets(code),
        "scan_boundaries (200k sorted values)": lambda m: m.scan_boundaries(values, codes, 2),
        "knn_positive_counts (1k queries x 5k rows)": lambda m: m.knn_positive_counts(train, labels, queries, 5),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=0, atol=1e-12)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _core is None:
        raise SystemExit("compiled core not built; run `pip install -e . --no-build-isolation` first")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':44s} {'python (s)':>11s} {'cython (s)':>11s} {'speedup':>8s}")
    for name, call in cases(rng).items():
        if not _same(call(_core_py), call(_core)):
            raise SystemExit(f"{name}: backends disagree")
        tp = _best_of(lambda: call(_core_py), args.repeat)
        tc = _best_of(lambda: call(_core), args.repeat)
        print(f"{name:44s} {tp:11.4f} {tc:11.4f} {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()
