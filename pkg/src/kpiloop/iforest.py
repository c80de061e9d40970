"""Isolation Forest with per-tree weights and an adjustable decision offset.

Trees are stored as flat arrays (feature index, threshold, children, and a
precomputed per-leaf path contribution) so scoring reduces to one traversal
kernel call per tree. A trained forest is immutable; weight and offset
updates return new forest values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import InvalidParams
from .features import FEATURE_NAMES, FeatureMatrix

MODEL_FORMAT_VERSION = 1

DEFAULT_TREES = 100
DEFAULT_SUBSAMPLE = 256


def average_path_length(m: int | float) -> float:
    """Expected unsuccessful-search path length c(m) of a BST of size m.

    c(m) = 2H(m-1) - 2(m-1)/m with H(i) = ln(i) + Euler's constant;
    c(2) = 1 and c(m <= 1) = 0.
    """
    if m <= 1:
        return 0.0
    if m == 2:
        return 1.0
    return 2.0 * (math.log(m - 1) + np.euler_gamma) - 2.0 * (m - 1) / m


@dataclass(frozen=True)
class IsoTree:
    """One isolation tree as parallel node arrays.

    ``feature`` is -1 at leaves; ``value`` holds depth + c(leaf size) at
    leaves and 0 at internal nodes; ``leaf_size`` is the count of training
    points that reached the leaf.
    """

    feature: np.ndarray  # int32
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32
    right: np.ndarray  # int32
    value: np.ndarray  # float64
    leaf_size: np.ndarray  # int32
    max_depth: int

    def path_lengths(self, x: np.ndarray) -> np.ndarray:
        """h(x) for a (n, d) batch: leaf depth plus c(leaf size)."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        return _kernels.tree_path_lengths(
            self.feature, self.threshold, self.left, self.right, self.value, x
        )

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "leaf_size": self.leaf_size.tolist(),
            "max_depth": self.max_depth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IsoTree":
        leaf_size = np.asarray(d["leaf_size"], dtype=np.int32)
        feature = np.asarray(d["feature"], dtype=np.int32)
        depth = _node_depths(
            np.asarray(d["left"], dtype=np.int32),
            np.asarray(d["right"], dtype=np.int32),
        )
        value = np.zeros(len(feature))
        leaves = feature < 0
        value[leaves] = depth[leaves] + np.array(
            [average_path_length(int(s)) for s in leaf_size[leaves]]
        )
        return cls(
            feature=feature,
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int32),
            right=np.asarray(d["right"], dtype=np.int32),
            value=value,
            leaf_size=leaf_size,
            max_depth=int(d["max_depth"]),
        )


def _node_depths(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    depth = np.zeros(len(left), dtype=np.int32)
    stack = [(0, 0)]
    while stack:
        node, d = stack.pop()
        depth[node] = d
        if left[node] >= 0:
            stack.append((left[node], d + 1))
            stack.append((right[node], d + 1))
    return depth


@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature z-score transform fitted on the training split."""

    mean: np.ndarray
    std: np.ndarray  # zero-variance features get std 1 (identity)

    @classmethod
    def fit(cls, rows: np.ndarray) -> "FeatureScaler":
        mean = rows.mean(axis=0)
        std = rows.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean=mean, std=std)

    def transform(self, rows: np.ndarray) -> np.ndarray:
        return (np.asarray(rows, dtype=np.float64) - self.mean) / self.std


@dataclass(frozen=True)
class IsolationForest:
    trees: tuple[IsoTree, ...]
    tree_weights: np.ndarray  # positive, sums to len(trees)
    subsample_size: int
    offset: float  # decision threshold on scores
    contamination: float
    scaler: FeatureScaler
    seed: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def normalizer(self) -> float:
        return average_path_length(self.subsample_size)


class _TreeBuilder:
    """Accumulates flat node arrays during recursive construction."""

    def __init__(self, max_depth: int):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.leaf_size: list[int] = []
        self.max_depth = max_depth

    def add_leaf(self, depth: int, size: int) -> int:
        idx = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(depth + average_path_length(size))
        self.leaf_size.append(size)
        return idx

    def add_split(self, feat: int, thr: float) -> int:
        idx = len(self.feature)
        self.feature.append(feat)
        self.threshold.append(thr)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.leaf_size.append(0)
        return idx

    def finish(self) -> IsoTree:
        return IsoTree(
            feature=np.array(self.feature, dtype=np.int32),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int32),
            right=np.array(self.right, dtype=np.int32),
            value=np.array(self.value, dtype=np.float64),
            leaf_size=np.array(self.leaf_size, dtype=np.int32),
            max_depth=self.max_depth,
        )


def _build_tree(x: np.ndarray, rng: np.random.Generator, max_depth: int) -> IsoTree:
    builder = _TreeBuilder(max_depth)
    _grow_node(x, np.arange(x.shape[0]), 0, rng, builder)
    return builder.finish()


def _grow_node(x, rows, depth, rng, builder) -> int:
    if depth >= builder.max_depth or len(rows) <= 1:
        return builder.add_leaf(depth, len(rows))
    sub = x[rows]
    lo = sub.min(axis=0)
    hi = sub.max(axis=0)
    spread = np.flatnonzero(hi > lo)
    if spread.size == 0:
        return builder.add_leaf(depth, len(rows))
    feat = int(spread[rng.integers(spread.size)])
    thr = 0.0
    for _ in range(8):  # uniform draw, retried on a float-boundary hit
        thr = float(rng.uniform(lo[feat], hi[feat]))
        if lo[feat] < thr < hi[feat]:
            break
    else:
        return builder.add_leaf(depth, len(rows))
    idx = builder.add_split(feat, thr)
    go_left = sub[:, feat] < thr
    left_idx = _grow_node(x, rows[go_left], depth + 1, rng, builder)
    builder.left[idx] = left_idx
    right_idx = _grow_node(x, rows[~go_left], depth + 1, rng, builder)
    builder.right[idx] = right_idx
    return idx


def train(
    features: FeatureMatrix | np.ndarray,
    *,
    trees: int = DEFAULT_TREES,
    subsample: int = DEFAULT_SUBSAMPLE,
    contamination: float,
    seed: int,
) -> IsolationForest:
    """Train an unsupervised forest; deterministic given the seed.

    Each tree grows on its own uniform subsample of size min(subsample, n)
    until isolation or depth ceil(log2(subsample)). The decision offset is
    the (1 - contamination) linear-interpolation quantile of the training
    scores; tree weights start uniform.
    """
    rows = features.rows if isinstance(features, FeatureMatrix) else np.asarray(features)
    n = rows.shape[0]
    psi = min(subsample, n)
    if trees < 1:
        raise InvalidParams(f"tree count must be >= 1, got {trees}")
    if psi < 2:
        raise InvalidParams(f"subsample size must be >= 2, got {psi}")
    if not 0.0 < contamination < 1.0:
        raise InvalidParams(f"contamination must be in (0,1), got {contamination}")

    scaler = FeatureScaler.fit(rows)
    x = scaler.transform(rows)
    max_depth = math.ceil(math.log2(psi))

    streams = np.random.SeedSequence(seed).spawn(trees)
    built = []
    for seq in streams:
        rng = np.random.default_rng(seq)
        sample = rng.choice(n, size=psi, replace=False)
        built.append(_build_tree(x[sample], rng, max_depth))

    forest = IsolationForest(
        trees=tuple(built),
        tree_weights=np.ones(trees),
        subsample_size=psi,
        offset=0.5,
        contamination=contamination,
        scaler=scaler,
        seed=seed,
    )
    train_scores = score(forest, rows)
    delta = float(np.quantile(train_scores, 1.0 - contamination, method="linear"))
    return replace(forest, offset=delta)


def path_length(tree: IsoTree, x: np.ndarray) -> float:
    """h(x) of a single (already scaled) feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (len(FEATURE_NAMES),):
        raise InvalidParams(f"expected a {len(FEATURE_NAMES)}-feature vector")
    return float(tree.path_lengths(x[np.newaxis, :])[0])


def tree_score_matrix(forest: IsolationForest, rows: np.ndarray) -> np.ndarray:
    """Per-tree anomaly scores 2^(-h_t(x)/c(psi)) as an (n, T) matrix."""
    x = forest.scaler.transform(rows)
    c = forest.normalizer()
    out = np.empty((x.shape[0], forest.n_trees))
    for t, tree in enumerate(forest.trees):
        out[:, t] = tree.path_lengths(x)
    return np.exp2(-out / c)


def score(forest: IsolationForest, features: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Weighted anomaly scores in (0,1): 2^(-sum_t w_t h_t / sum_t w_t / c)."""
    rows = features.rows if isinstance(features, FeatureMatrix) else np.asarray(features)
    x = forest.scaler.transform(rows)
    acc = np.zeros(x.shape[0])
    for w, tree in zip(forest.tree_weights, forest.trees):
        acc += w * tree.path_lengths(x)
    expected = acc / forest.tree_weights.sum()
    return np.exp2(-expected / forest.normalizer())


def classify(forest: IsolationForest, scores: np.ndarray) -> np.ndarray:
    """1 where score >= offset (the boundary counts as anomalous)."""
    return (np.asarray(scores) >= forest.offset).astype(np.int8)


def update_tree_weights(
    forest: IsolationForest, anomaly_rows: np.ndarray
) -> IsolationForest:
    """Reweight trees by their mean per-tree score on labeled anomalies.

    w_t = T * m_t / sum_u m_u with m_t the mean of 2^(-h_t(x)/c(psi)) over
    the anomalous rows. Weights keep summing to T; the offset never moves.
    With no anomalies the forest is returned unchanged.
    """
    anomaly_rows = np.atleast_2d(np.asarray(anomaly_rows, dtype=np.float64))
    if anomaly_rows.shape[0] == 0:
        return forest
    per_tree = tree_score_matrix(forest, anomaly_rows).mean(axis=0)
    weights = forest.n_trees * per_tree / per_tree.sum()
    return replace(forest, tree_weights=weights)


def set_offset(forest: IsolationForest, delta: float) -> IsolationForest:
    """Forest with a new decision offset; trees and weights unchanged."""
    return replace(forest, offset=float(delta))


def to_dict(forest: IsolationForest) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "feature_names": list(FEATURE_NAMES),
        "params": {
            "trees": forest.n_trees,
            "subsample_size": forest.subsample_size,
            "contamination": forest.contamination,
            "seed": forest.seed,
        },
        "offset": forest.offset,
        "tree_weights": forest.tree_weights.tolist(),
        "scaler": {
            "mean": forest.scaler.mean.tolist(),
            "std": forest.scaler.std.tolist(),
        },
        "trees": [tree.to_dict() for tree in forest.trees],
    }


def from_dict(d: dict) -> IsolationForest:
    version = d.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise InvalidParams(f"unsupported model format version {version!r}")
    return IsolationForest(
        trees=tuple(IsoTree.from_dict(td) for td in d["trees"]),
        tree_weights=np.asarray(d["tree_weights"], dtype=np.float64),
        subsample_size=int(d["params"]["subsample_size"]),
        offset=float(d["offset"]),
        contamination=float(d["params"]["contamination"]),
        scaler=FeatureScaler(
            mean=np.asarray(d["scaler"]["mean"], dtype=np.float64),
            std=np.asarray(d["scaler"]["std"], dtype=np.float64),
        ),
        seed=int(d["params"]["seed"]),
    )


def dumps(forest: IsolationForest) -> str:
    """Canonical JSON: equal models serialize to identical bytes."""
    return json.dumps(to_dict(forest), sort_keys=True, separators=(",", ":"))


def save_model(forest: IsolationForest, path: str | Path) -> None:
    Path(path).write_text(dumps(forest), encoding="utf-8")


def load_model(path: str | Path) -> IsolationForest:
    return from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
