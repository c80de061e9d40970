"""Pure-numpy tree traversal, used when the compiled kernel is unavailable.

Walks all points down one tree level-synchronously: every iteration gathers
each point's current node and advances it, so the loop runs max-depth times
instead of once per point. Results are bit-identical to the compiled kernel
(both only compare against stored thresholds and copy precomputed leaf
values).
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def tree_path_lengths(
    feature: np.ndarray,
    threshold: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    value: np.ndarray,
    x: np.ndarray,
) -> np.ndarray:
    """Per-point path length (leaf depth + size adjustment) for one tree.

    ``feature`` is -1 at leaves; ``value`` holds the precomputed path
    contribution of each leaf.
    """
    n = x.shape[0]
    node = np.zeros(n, dtype=np.int32)
    rows = np.arange(n)
    while True:
        feat = feature[node]
        active = feat >= 0
        if not active.any():
            break
        idx = node[active]
        go_left = x[rows[active], feat[active]] < threshold[idx]
        node[active] = np.where(go_left, left[idx], right[idx])
    return value[node]
