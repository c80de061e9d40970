"""Compare the compiled traversal kernel against the numpy fallback.

Both backends are imported directly (bypassing the import-time selection),
timed on the same trained forest, and checked for bit-identical output.

Usage: python3 benchmarks/bench_kernels.py [--points N] [--trees T] [--repeats R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from kpiloop import SynthSpec, featurize, synth_generate, train
from kpiloop._kernels import pytree

try:
    from kpiloop._kernels import _ctree
except ImportError:
    _ctree = None


def walk_forest(kernel, forest, x: np.ndarray) -> np.ndarray:
    """The scoring hot loop: weighted path sums over every tree."""
    acc = np.zeros(x.shape[0])
    for w, tree in zip(forest.tree_weights, forest.trees):
        acc += w * kernel.tree_path_lengths(
            tree.feature, tree.threshold, tree.left, tree.right, tree.value, x
        )
    return acc


def time_backend(kernel, forest, x: np.ndarray, repeats: int) -> tuple[float, np.ndarray]:
    result = walk_forest(kernel, forest, x)  # warm up, and keep for comparison
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        walk_forest(kernel, forest, x)
        best = min(best, time.perf_counter() - start)
    return best, result


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=20000)
    parser.add_argument("--trees", type=int, default=100)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    ts = synth_generate(SynthSpec(n=args.points, seed=0, anomaly_rate=0.01))
    features = featurize(ts)
    forest = train(features, trees=args.trees, contamination=0.03, seed=0)
    x = forest.scaler.transform(features.rows)

    print(f"{args.points} points, {args.trees} trees, best of {args.repeats}\n")
    print(f"{'backend':<10} {'seconds':>9} {'points/s':>12}")
    py_time, py_result = time_backend(pytree, forest, x, args.repeats)
    print(f"{'python':<10} {py_time:>9.4f} {args.points / py_time:>12.0f}")

    if _ctree is None:
        print("\ncompiled kernel not built; run pip install -e . --no-build-isolation")
        return 0

    c_time, c_result = time_backend(_ctree, forest, x, args.repeats)
    print(f"{'compiled':<10} {c_time:>9.4f} {args.points / c_time:>12.0f}")
    identical = np.array_equal(py_result, c_result)
    print(f"\nspeedup {py_time / c_time:.1f}x, outputs bit-identical: {identical}")
    return 0 if identical else 1


if __name__ == "__main__":
    raise SystemExit(main())
