"""Experiment grid runner.

Runs every (query strategy, update strategy, budget) combination over one
or more KPI series, with a simulated oracle answering from ground truth.
Each series is split into a training half (model fitting and queries) and
a test half (reported delay-adjusted F1); separate train/test files are
also supported. Results come back per KPI and aggregated across KPIs.
"""

from __future__ import annotations

import concurrent.futures
import csv
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .active import LabeledSet, apply_update, derive_round_seed, make_batch
from .errors import ConfigError, DatasetError, MissingClassWarning
from .evaluate import DEFAULT_DELAY, evaluate
from .features import FeatureMatrix, featurize
from .iforest import (
    DEFAULT_SUBSAMPLE,
    DEFAULT_TREES,
    IsolationForest,
    classify,
    score,
    train,
)
from .synth import SynthSpec, synth_generate
from .timeseries import TimeSeries, fill_gaps, load_csv

BASELINE_UPDATE = "none"


@dataclass(frozen=True)
class ModelConfig:
    trees: int = DEFAULT_TREES
    subsample: int = DEFAULT_SUBSAMPLE
    contamination: float = 0.03


@dataclass(frozen=True)
class BenchConfig:
    datasets: tuple[dict, ...]
    strategies: tuple[str, ...] = ("TA",)
    updates: tuple[str, ...] = ("O",)
    budgets: tuple[float, ...] = (0.01,)
    seeds: tuple[int, ...] = (0,)
    model: ModelConfig = field(default_factory=ModelConfig)
    k: int = DEFAULT_DELAY
    rounds: int = 1
    jobs: int = 1


@dataclass(frozen=True)
class RowResult:
    kpi: str
    seed: int
    strategy: str
    update: str
    budget_fraction: float
    budget_points: int
    baseline_f1: float
    post_f1: float
    baseline_precision: float
    baseline_recall: float
    post_precision: float
    post_recall: float
    missing_class: bool
    seconds: float


@dataclass(frozen=True)
class AggregateRow:
    strategy: str
    update: str
    budget_fraction: float
    cells: int
    mean_baseline_f1: float
    mean_post_f1: float
    mean_rel_improvement: float
    mean_seconds: float


@dataclass(frozen=True)
class ResultTable:
    rows: tuple[RowResult, ...]
    aggregates: tuple[AggregateRow, ...]

    def write_csv(self, path: str | Path) -> None:
        fields = [
            "kpi",
            "seed",
            "strategy",
            "update",
            "budget_fraction",
            "budget_points",
            "baseline_f1",
            "post_f1",
            "baseline_precision",
            "baseline_recall",
            "post_precision",
            "post_recall",
            "missing_class",
            "seconds",
        ]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(fields)
            for row in self.rows:
                writer.writerow([getattr(row, f) for f in fields])

    def render_text(self) -> str:
        header = (
            "strategy",
            "update",
            "budget",
            "cells",
            "baseline_f1",
            "post_f1",
            "rel_improvement",
            "seconds",
        )
        body = [
            (
                agg.strategy,
                agg.update,
                f"{agg.budget_fraction:g}",
                str(agg.cells),
                f"{agg.mean_baseline_f1:.4f}",
                f"{agg.mean_post_f1:.4f}",
                f"{agg.mean_rel_improvement:+.2%}",
                f"{agg.mean_seconds:.2f}",
            )
            for agg in self.aggregates
        ]
        widths = [
            max(len(header[i]), *(len(r[i]) for r in body)) if body else len(header[i])
            for i in range(len(header))
        ]
        lines = [
            "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)),
            "  ".join("-" * w for w in widths),
        ]
        lines += ["  ".join(c.ljust(widths[i]) for i, c in enumerate(r)) for r in body]
        return "\n".join(lines)


@dataclass(frozen=True)
class _Cell:
    """One KPI's featurized train/test material for a single seed."""

    kpi: str
    seed: int
    train_features: FeatureMatrix
    train_labels: np.ndarray
    train_eligible: np.ndarray  # non-synthetic training points
    test_rows: np.ndarray
    test_labels: np.ndarray


def load_config(path: str | Path) -> BenchConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> BenchConfig:
    known = {
        "datasets",
        "strategies",
        "updates",
        "budgets",
        "seeds",
        "model",
        "k",
        "rounds",
        "jobs",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    datasets = raw.get("datasets")
    if not datasets or not isinstance(datasets, list):
        raise ConfigError("config needs a non-empty 'datasets' list")
    for ds in datasets:
        if not isinstance(ds, dict) or ds.get("kind") not in ("synth", "csv", "aiops"):
            raise ConfigError(
                "each dataset needs kind: synth, csv, or aiops; got "
                f"{ds!r}"
            )
    model_raw = raw.get("model", {})
    if not isinstance(model_raw, dict):
        raise ConfigError("'model' must be a mapping")
    try:
        model = ModelConfig(**model_raw)
    except TypeError as exc:
        raise ConfigError(f"bad model settings: {exc}") from exc
    budgets = tuple(float(b) for b in raw.get("budgets", (0.01,)))
    if any(not 0.0 <= b <= 1.0 for b in budgets):
        raise ConfigError("budgets must lie in [0, 1]")
    cfg = BenchConfig(
        datasets=tuple(datasets),
        strategies=tuple(raw.get("strategies", ("TA",))),
        updates=tuple(raw.get("updates", ("O",))),
        budgets=budgets,
        seeds=tuple(int(s) for s in raw.get("seeds", (0,))),
        model=model,
        k=int(raw.get("k", DEFAULT_DELAY)),
        rounds=int(raw.get("rounds", 1)),
        jobs=int(raw.get("jobs", 1)),
    )
    if cfg.rounds < 1:
        raise ConfigError("rounds must be >= 1")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    return cfg


def _split_cell(kpi: str, ts: TimeSeries, seed: int) -> _Cell:
    """Featurize a whole series once, then slice halves on the feature rows.

    Features are trailing-window functions, so test rows see genuine
    history rather than a cold start at the split point.
    """
    feats = featurize(ts)
    mid = ts.n // 2
    if mid < 2 or ts.n - mid < 2:
        raise DatasetError(f"series {kpi!r} too short to split")
    if ts.labels is None:
        raise DatasetError(f"series {kpi!r} has no ground-truth labels")
    synth_mask = ts.synthetic_mask
    train_features = FeatureMatrix(
        series_id=ts.id,
        rows=feats.rows[:mid],
        window_size=feats.window_size,
        saliency_window=feats.saliency_window,
    )
    return _Cell(
        kpi=kpi,
        seed=seed,
        train_features=train_features,
        train_labels=ts.labels[:mid],
        train_eligible=~synth_mask[:mid],
        test_rows=feats.rows[mid:],
        test_labels=ts.labels[mid:],
    )


def _pair_cell(
    kpi: str, train_ts: TimeSeries, test_ts: TimeSeries, seed: int
) -> _Cell:
    if train_ts.labels is None or test_ts.labels is None:
        raise DatasetError(f"series {kpi!r} has no ground-truth labels")
    train_features = featurize(train_ts)
    test_features = featurize(test_ts)
    return _Cell(
        kpi=kpi,
        seed=seed,
        train_features=train_features,
        train_labels=train_ts.labels,
        train_eligible=~train_ts.synthetic_mask,
        test_rows=test_features.rows,
        test_labels=test_ts.labels,
    )


def load_aiops_csv(path: str | Path) -> list[TimeSeries]:
    """One gap-filled TimeSeries per KPI ID from the competition schema.

    Expects columns timestamp, value, label, and KPI ID (header names are
    matched case-insensitively, so `KPI ID` and `kpi_id` both work).
    """
    groups: dict[str, list[tuple[int, float, int]]] = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise DatasetError(f"{path}: empty file")
            names = {n.strip().lower(): n for n in reader.fieldnames}
            try:
                ts_col = names["timestamp"]
                val_col = names["value"]
                lab_col = names["label"]
                kpi_col = names.get("kpi id") or names["kpi_id"]
            except KeyError as exc:
                raise DatasetError(
                    f"{path}: missing column {exc.args[0]!r}"
                ) from exc
            for row in reader:
                groups.setdefault(row[kpi_col], []).append(
                    (int(row[ts_col]), float(row[val_col]), int(row[lab_col]))
                )
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise DatasetError(f"{path}: malformed row: {exc}") from exc
    out = []
    for kpi_id in sorted(groups):
        rows = sorted(groups[kpi_id])
        ts = TimeSeries(
            id=kpi_id,
            timestamps=np.array([r[0] for r in rows], dtype=np.int64),
            values=np.array([r[1] for r in rows], dtype=np.float64),
            labels=np.array([r[2] for r in rows], dtype=np.int8),
            sampling_interval=0,
        )
        out.append(fill_gaps(ts))
    return out


def _cells_for_seed(datasets: tuple[dict, ...], seed: int) -> list[_Cell]:
    cells = []
    for ds in datasets:
        kind = ds["kind"]
        if kind == "synth":
            spec_raw = {k: v for k, v in ds.items() if k != "kind"}
            spec_raw["seed"] = int(spec_raw.get("seed", 0)) + seed
            spec = SynthSpec.from_dict(spec_raw)
            ts = synth_generate(spec)
            cells.append(_split_cell(ts.id, ts, seed))
        elif kind == "csv":
            train_path = ds.get("train") or ds.get("path")
            if not train_path:
                raise ConfigError("csv dataset needs 'path' or 'train'")
            kpi = str(ds.get("id") or Path(train_path).stem)
            train_ts = fill_gaps(load_csv(train_path, series_id=kpi))
            if ds.get("test"):
                test_ts = fill_gaps(load_csv(ds["test"], series_id=kpi))
                cells.append(_pair_cell(kpi, train_ts, test_ts, seed))
            else:
                cells.append(_split_cell(kpi, train_ts, seed))
        else:  # aiops
            if "path" not in ds:
                raise ConfigError("aiops dataset needs 'path'")
            for ts in load_aiops_csv(ds["path"]):
                cells.append(_split_cell(ts.id, ts, seed))
    return cells


def run_cell(cell: _Cell, config: BenchConfig) -> list[RowResult]:
    """Every grid combination on one featurized KPI, sharing its baseline."""
    model = config.model
    baseline = train(
        cell.train_features,
        trees=model.trees,
        subsample=model.subsample,
        contamination=model.contamination,
        seed=cell.seed,
    )
    base_report = evaluate(
        cell.test_labels, classify(baseline, score(baseline, cell.test_rows)), config.k
    )
    train_rows = cell.train_features.rows
    results = []
    for strategy in config.strategies:
        for update in config.updates:
            for budget in config.budgets:
                started = time.perf_counter()
                forest = baseline
                eligible = cell.train_eligible.copy()
                pool_size = int(eligible.sum())
                b = min(math.ceil(budget * pool_size), pool_size)
                missing = False
                if b > 0:
                    for rnd in range(config.rounds):
                        remaining = int(eligible.sum())
                        if remaining == 0:
                            break
                        pool_scores = score(forest, train_rows)
                        batch = make_batch(
                            strategy,
                            pool_scores,
                            forest.offset,
                            min(b, remaining),
                            eligible,
                            seed=derive_round_seed(cell.seed, rnd),
                        )
                        labeled = LabeledSet(
                            batch.indices,
                            cell.train_labels[batch.indices],
                            batch.scores,
                        )
                        # the per-row missing_class flag already records this
                        with warnings.catch_warnings():
                            warnings.simplefilter("ignore", MissingClassWarning)
                            result = apply_update(
                                forest, cell.train_features, labeled, update
                            )
                        forest = result.forest
                        missing = missing or result.missing_class
                        eligible[batch.indices] = False
                if b > 0:
                    post_report = evaluate(
                        cell.test_labels,
                        classify(forest, score(forest, cell.test_rows)),
                        config.k,
                    )
                else:
                    post_report = base_report
                results.append(
                    RowResult(
                        kpi=cell.kpi,
                        seed=cell.seed,
                        strategy=strategy,
                        update=update,
                        budget_fraction=budget,
                        budget_points=b,
                        baseline_f1=base_report.f1,
                        post_f1=post_report.f1,
                        baseline_precision=base_report.precision,
                        baseline_recall=base_report.recall,
                        post_precision=post_report.precision,
                        post_recall=post_report.recall,
                        missing_class=missing,
                        seconds=time.perf_counter() - started,
                    )
                )
    return results


def _aggregate(rows: list[RowResult]) -> tuple[AggregateRow, ...]:
    groups: dict[tuple, list[RowResult]] = {}
    for row in rows:
        groups.setdefault((row.strategy, row.update, row.budget_fraction), []).append(
            row
        )
    out = []
    for (strategy, update, budget), members in sorted(groups.items()):
        rels = [
            (m.post_f1 - m.baseline_f1) / m.baseline_f1
            for m in members
            if m.baseline_f1 > 0
        ]
        out.append(
            AggregateRow(
                strategy=strategy,
                update=update,
                budget_fraction=budget,
                cells=len(members),
                mean_baseline_f1=float(np.mean([m.baseline_f1 for m in members])),
                mean_post_f1=float(np.mean([m.post_f1 for m in members])),
                mean_rel_improvement=float(np.mean(rels)) if rels else 0.0,
                mean_seconds=float(np.mean([m.seconds for m in members])),
            )
        )
    return tuple(out)


def _run_one(args: tuple) -> list[RowResult]:
    cell, config = args
    return run_cell(cell, config)


def run_experiment(config: BenchConfig) -> ResultTable:
    cells = []
    for seed in config.seeds:
        cells.extend(_cells_for_seed(config.datasets, seed))
    if not cells:
        raise ConfigError("no dataset cells to run")
    if config.jobs > 1 and len(cells) > 1:
        with concurrent.futures.ProcessPoolExecutor(config.jobs) as pool:
            chunks = list(pool.map(_run_one, [(c, config) for c in cells]))
    else:
        chunks = [run_cell(c, config) for c in cells]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(
        key=lambda r: (r.kpi, r.seed, r.strategy, r.update, r.budget_fraction)
    )
    return ResultTable(rows=tuple(rows), aggregates=_aggregate(rows))
