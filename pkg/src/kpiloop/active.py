"""Query strategies, feedback incorporation, and model update strategies.

Strategies select pool points to label (top anomalies, closest to the
decision boundary, their half-and-half combination, or a random baseline);
updates move tree weights (TW), the decision offset (O), or both in
sequence (TW+O).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    BudgetExceedsPool,
    MissingClass,
    MissingClassWarning,
    NoGroundTruth,
)
from .features import FeatureMatrix
from .iforest import IsolationForest, score, set_offset, update_tree_weights
from .timeseries import TimeSeries

QUERY_STRATEGIES = ("TA", "CTDB", "TA+CTDB", "Random")
UPDATE_STRATEGIES = ("TW", "O", "TW+O")


@dataclass(frozen=True)
class QueryBatch:
    """Points selected for expert labeling, with their query-time scores."""

    indices: np.ndarray  # distinct pool indices
    strategy: str
    budget: int
    scores: np.ndarray  # anomaly scores at query time, aligned with indices
    budget_fraction: float | None = None

    def __post_init__(self):
        idx = np.ascontiguousarray(self.indices, dtype=np.int64)
        if len(np.unique(idx)) != len(idx):
            raise ValueError("batch indices must be distinct")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(
            self, "scores", np.ascontiguousarray(self.scores, dtype=np.float64)
        )

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class LabeledSet:
    """Expert labels for queried points plus their query-time scores."""

    indices: np.ndarray
    labels: np.ndarray  # {0,1}
    scores: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "indices", np.ascontiguousarray(self.indices, dtype=np.int64)
        )
        object.__setattr__(
            self, "labels", np.ascontiguousarray(self.labels, dtype=np.int8)
        )
        object.__setattr__(
            self, "scores", np.ascontiguousarray(self.scores, dtype=np.float64)
        )

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def anomalous(self) -> np.ndarray:
        return self.indices[self.labels == 1]

    @property
    def normal(self) -> np.ndarray:
        return self.indices[self.labels == 0]

    @property
    def anomalous_scores(self) -> np.ndarray:
        return self.scores[self.labels == 1]

    @property
    def normal_scores(self) -> np.ndarray:
        return self.scores[self.labels == 0]


def derive_round_seed(seed: int, round_index: int) -> int:
    """Stable per-round stream for the Random strategy, decorrelated from
    the forest's own seed usage."""
    seq = np.random.SeedSequence((seed, 0x51C, round_index))
    return int(seq.generate_state(1)[0])


def interest_ta(scores: np.ndarray) -> np.ndarray:
    """Top-anomalous interest: f(x) = score(x)."""
    return np.asarray(scores, dtype=np.float64)


def interest_ctdb(scores: np.ndarray, delta: float) -> np.ndarray:
    """Boundary interest: f(x) = -(score(x) - delta)^2, maximal at the offset."""
    return -((np.asarray(scores, dtype=np.float64) - delta) ** 2)


def select_points(
    interest: np.ndarray, b: int, eligible: np.ndarray | None = None
) -> np.ndarray:
    """Indices of the b points maximizing the interest values.

    Equivalent to sorting descending and taking the first b; ties break
    toward the lower index. ``eligible`` (boolean mask) restricts the pool.
    """
    interest = np.asarray(interest, dtype=np.float64)
    pool = np.arange(len(interest)) if eligible is None else np.flatnonzero(eligible)
    if b > len(pool):
        raise BudgetExceedsPool(f"budget {b} exceeds pool of {len(pool)}")
    if b == 0:
        return np.empty(0, dtype=np.int64)
    order = np.argsort(-interest[pool], kind="stable")
    return np.sort(pool[order[:b]]).astype(np.int64)


def select_ta(
    scores: np.ndarray,
    b: int,
    eligible: np.ndarray | None = None,
    budget_fraction: float | None = None,
) -> QueryBatch:
    idx = select_points(interest_ta(scores), b, eligible)
    return QueryBatch(idx, "TA", b, np.asarray(scores)[idx], budget_fraction)


def select_ctdb(
    scores: np.ndarray,
    delta: float,
    b: int,
    eligible: np.ndarray | None = None,
    budget_fraction: float | None = None,
) -> QueryBatch:
    idx = select_points(interest_ctdb(scores, delta), b, eligible)
    return QueryBatch(idx, "CTDB", b, np.asarray(scores)[idx], budget_fraction)


def select_combined(
    scores: np.ndarray,
    delta: float,
    b: int,
    eligible: np.ndarray | None = None,
    budget_fraction: float | None = None,
) -> QueryBatch:
    """ceil(b/2) TA points, then floor(b/2) CTDB points from the remainder."""
    scores = np.asarray(scores, dtype=np.float64)
    mask = (
        np.ones(len(scores), dtype=bool) if eligible is None else np.array(eligible)
    )
    if b > int(mask.sum()):
        raise BudgetExceedsPool(f"budget {b} exceeds pool of {int(mask.sum())}")
    ta_idx = select_points(interest_ta(scores), (b + 1) // 2, mask)
    mask[ta_idx] = False
    ctdb_idx = select_points(interest_ctdb(scores, delta), b // 2, mask)
    idx = np.sort(np.concatenate([ta_idx, ctdb_idx]))
    return QueryBatch(idx, "TA+CTDB", b, scores[idx], budget_fraction)


def select_random(
    pool: np.ndarray,
    b: int,
    seed: int,
    scores: np.ndarray | None = None,
    budget_fraction: float | None = None,
) -> QueryBatch:
    """Uniform sample without replacement; deterministic given the seed.

    ``pool`` is either a boolean eligibility mask or an index array.
    """
    pool = np.asarray(pool)
    indices = np.flatnonzero(pool) if pool.dtype == bool else pool.astype(np.int64)
    if b > len(indices):
        raise BudgetExceedsPool(f"budget {b} exceeds pool of {len(indices)}")
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(indices, size=b, replace=False))
    batch_scores = (
        np.zeros(b) if scores is None else np.asarray(scores)[picked]
    )
    return QueryBatch(picked, "Random", b, batch_scores, budget_fraction)


def make_batch(
    strategy: str,
    scores: np.ndarray,
    delta: float,
    b: int,
    eligible: np.ndarray | None = None,
    seed: int = 0,
    budget_fraction: float | None = None,
) -> QueryBatch:
    """Dispatch on a strategy name from QUERY_STRATEGIES."""
    if strategy == "TA":
        return select_ta(scores, b, eligible, budget_fraction)
    if strategy == "CTDB":
        return select_ctdb(scores, delta, b, eligible, budget_fraction)
    if strategy == "TA+CTDB":
        return select_combined(scores, delta, b, eligible, budget_fraction)
    if strategy == "Random":
        pool = (
            np.ones(len(scores), dtype=bool) if eligible is None else eligible
        )
        return select_random(pool, b, seed, scores, budget_fraction)
    raise ValueError(f"unknown query strategy {strategy!r}")


def calculate_offset(labeled: LabeledSet) -> float:
    """Midpoint between the lowest anomalous and highest normal score."""
    if len(labeled.anomalous_scores) == 0 or len(labeled.normal_scores) == 0:
        raise MissingClass(
            "offset update needs at least one anomalous and one normal label"
        )
    return float(
        (labeled.anomalous_scores.min() + labeled.normal_scores.max()) / 2.0
    )


@dataclass(frozen=True)
class UpdateResult:
    forest: IsolationForest
    strategy: str
    old_offset: float
    new_offset: float
    missing_class: bool  # offset retained because one label class was absent


def apply_update(
    forest: IsolationForest,
    features: FeatureMatrix,
    labeled: LabeledSet,
    strategy: str,
) -> UpdateResult:
    """Apply TW, O, or TW+O to a forest given labeled feedback.

    TW never moves the offset. O re-scores the labeled points with the
    current forest and places the offset at the class-separating midpoint;
    in TW+O the re-scoring happens after the weight update. A missing label
    class keeps the offset and raises a warning instead of failing (the TW
    half of TW+O still applies).
    """
    if strategy not in UPDATE_STRATEGIES:
        raise ValueError(f"unknown update strategy {strategy!r}")
    if len(labeled) == 0:
        raise ValueError("labeled set is empty")
    old_offset = forest.offset
    updated = forest

    if strategy in ("TW", "TW+O"):
        updated = update_tree_weights(updated, features.rows[labeled.anomalous])

    missing_class = False
    if strategy in ("O", "TW+O"):
        fresh = score(updated, features.rows[labeled.indices])
        rescored = LabeledSet(labeled.indices, labeled.labels, fresh)
        try:
            updated = set_offset(updated, calculate_offset(rescored))
        except MissingClass as exc:
            missing_class = True
            warnings.warn(str(exc), MissingClassWarning, stacklevel=2)

    return UpdateResult(
        forest=updated,
        strategy=strategy,
        old_offset=old_offset,
        new_offset=updated.offset,
        missing_class=missing_class,
    )


def simulated_oracle(ts: TimeSeries, batch: QueryBatch) -> LabeledSet:
    """Ground-truth labels for a batch, standing in for the domain expert."""
    if ts.labels is None:
        raise NoGroundTruth(f"series {ts.id!r} has no ground-truth labels")
    return LabeledSet(
        indices=batch.indices,
        labels=ts.labels[batch.indices],
        scores=batch.scores,
    )
