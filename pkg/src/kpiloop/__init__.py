"""Active-learning workbench for unsupervised KPI anomaly detection.

Core pipeline: ingest a univariate series, extract trailing-window and
saliency features, train an isolation forest, then improve it with a small
budget of expert labels via query strategies (top anomalous, closest to the
decision boundary, their mix, or random) and lightweight updates (tree
reweighting and decision-offset placement). Includes a delay-adjusted F1
protocol, a benchmark grid runner, and an HTTP labeling service.
"""

from .errors import (
    BudgetExceedsPool,
    ConfigError,
    DatasetError,
    DuplicateTimestamp,
    EmptySeries,
    InvalidLabel,
    InvalidParams,
    InvalidSpec,
    KpiLoopError,
    LengthMismatch,
    MalformedRow,
    MissingClass,
    MissingClassWarning,
    NoGroundTruth,
    NoLabels,
    NotQueried,
    UnknownPoint,
    UnknownSession,
)
from .timeseries import TimeSeries, extract_segments, fill_gaps, load_csv, write_csv
from .features import FeatureMatrix, FEATURE_NAMES, featurize, saliency_series
from .iforest import (
    IsolationForest,
    average_path_length,
    classify,
    load_model,
    save_model,
    score,
    set_offset,
    train,
    update_tree_weights,
)
from .active import (
    LabeledSet,
    QueryBatch,
    UpdateResult,
    apply_update,
    calculate_offset,
    interest_ctdb,
    interest_ta,
    make_batch,
    select_combined,
    select_ctdb,
    select_points,
    select_random,
    select_ta,
    simulated_oracle,
)
from .evaluate import EvalReport, adjust_predictions, evaluate
from .synth import SynthSpec, synth_generate

__version__ = "0.1.0"

__all__ = [
    "BudgetExceedsPool",
    "ConfigError",
    "DatasetError",
    "DuplicateTimestamp",
    "EmptySeries",
    "EvalReport",
    "FEATURE_NAMES",
    "FeatureMatrix",
    "InvalidLabel",
    "InvalidParams",
    "InvalidSpec",
    "IsolationForest",
    "KpiLoopError",
    "LabeledSet",
    "LengthMismatch",
    "MalformedRow",
    "MissingClass",
    "MissingClassWarning",
    "NoGroundTruth",
    "NoLabels",
    "NotQueried",
    "QueryBatch",
    "SynthSpec",
    "TimeSeries",
    "UnknownPoint",
    "UnknownSession",
    "UpdateResult",
    "adjust_predictions",
    "apply_update",
    "average_path_length",
    "calculate_offset",
    "classify",
    "evaluate",
    "extract_segments",
    "featurize",
    "fill_gaps",
    "interest_ctdb",
    "interest_ta",
    "load_csv",
    "load_model",
    "make_batch",
    "save_model",
    "saliency_series",
    "score",
    "select_combined",
    "select_ctdb",
    "select_points",
    "select_random",
    "select_ta",
    "set_offset",
    "simulated_oracle",
    "synth_generate",
    "train",
    "update_tree_weights",
    "write_csv",
]
