import numpy as np
import pytest

from kpiloop import SynthSpec, featurize, synth_generate, train
from kpiloop.iforest import FeatureScaler, IsolationForest, IsoTree


@pytest.fixture(scope="session")
def small_series():
    return synth_generate(SynthSpec(n=800, seed=2, anomaly_rate=0.02))


@pytest.fixture(scope="session")
def small_features(small_series):
    return featurize(small_series)


@pytest.fixture(scope="session")
def small_forest(small_features):
    return train(small_features, trees=40, contamination=0.03, seed=9)


def leaf_tree(path_length: float, leaf_size: int = 2) -> IsoTree:
    """Single-leaf tree whose every traversal yields the given path length."""
    return IsoTree(
        feature=np.array([-1], dtype=np.int32),
        threshold=np.array([0.0]),
        left=np.array([-1], dtype=np.int32),
        right=np.array([-1], dtype=np.int32),
        value=np.array([float(path_length)]),
        leaf_size=np.array([leaf_size], dtype=np.int32),
        max_depth=0,
    )


def toy_forest(path_lengths, offset: float = 0.5, subsample: int = 2) -> IsolationForest:
    """Forest of single-leaf trees with fixed path lengths, for exact-value tests."""
    return IsolationForest(
        trees=tuple(leaf_tree(h) for h in path_lengths),
        tree_weights=np.ones(len(path_lengths)),
        subsample_size=subsample,
        offset=offset,
        contamination=0.03,
        scaler=FeatureScaler(mean=np.zeros(6), std=np.ones(6)),
        seed=0,
    )
