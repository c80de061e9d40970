"""Delay-adjusted F1 evaluation.

A contiguous run of anomalous truth points counts as detected only when a
positive prediction falls within k points of the run's start; detected runs
are credited in full, missed runs are zeroed. Precision, recall, and F1 are
then computed point-wise on the adjusted predictions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch
from .timeseries import extract_segments

DEFAULT_DELAY = 7


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    k: int
    tp: int
    fp: int
    fn: int
    adjusted_predictions: np.ndarray

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "k": self.k,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def render_text(self) -> str:
        rows = [
            ("precision", f"{self.precision:.6f}"),
            ("recall", f"{self.recall:.6f}"),
            ("f1", f"{self.f1:.6f}"),
            ("k", str(self.k)),
            ("tp", str(self.tp)),
            ("fp", str(self.fp)),
            ("fn", str(self.fn)),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {val}" for name, val in rows)


def _as_binary(name: str, values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise LengthMismatch(f"{name} must be one-dimensional")
    return (arr != 0).astype(np.int8)


def adjust_predictions(truth, pred, k: int = DEFAULT_DELAY) -> np.ndarray:
    """Credit or zero whole truth segments based on the k-point delay rule.

    For each maximal truth segment [s, e]: any positive prediction at an
    index in [s, min(e, s + k)] marks the whole segment detected (adjusted
    predictions 1 on [s, e]); otherwise the segment is zeroed. Predictions
    outside truth segments pass through unchanged.
    """
    truth = _as_binary("truth", truth)
    pred = _as_binary("pred", pred)
    if len(truth) != len(pred):
        raise LengthMismatch(
            f"truth has {len(truth)} points, predictions have {len(pred)}"
        )
    if k < 0:
        raise LengthMismatch("delay k must be >= 0")
    adjusted = pred.copy()
    for start, end in extract_segments(truth):
        window_end = min(end, start + k)
        detected = bool(pred[start : window_end + 1].any())
        adjusted[start : end + 1] = 1 if detected else 0
    return adjusted


def evaluate(truth, pred, k: int = DEFAULT_DELAY) -> EvalReport:
    """Delay-adjusted point-wise precision, recall, and F1 (0/0 scored as 0)."""
    truth = _as_binary("truth", truth)
    adjusted = adjust_predictions(truth, pred, k)
    tp = int(np.sum((adjusted == 1) & (truth == 1)))
    fp = int(np.sum((adjusted == 1) & (truth == 0)))
    fn = int(np.sum((adjusted == 0) & (truth == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall
        else 0.0
    )
    return EvalReport(
        precision=precision,
        recall=recall,
        f1=f1,
        k=k,
        tp=tp,
        fp=fp,
        fn=fn,
        adjusted_predictions=adjusted,
    )
