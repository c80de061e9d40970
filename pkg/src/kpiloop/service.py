"""Session-oriented HTTP labeling service.

Each session owns a dataset, a trained forest, and a query loop: the
service hands out a batch of points to label, accepts expert labels,
applies the configured model update on request, and feeds the UI with
series data and metrics. Sessions persist under one directory each
(session.json, per-round model snapshots, an append-only label log) and
resume from disk after a restart.
"""

from __future__ import annotations

import json
import math
import os
import threading
import uuid
import warnings
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .active import (
    QUERY_STRATEGIES,
    UPDATE_STRATEGIES,
    LabeledSet,
    apply_update,
    derive_round_seed,
    make_batch,
)
from .errors import (
    ConfigError,
    DatasetError,
    InvalidLabel,
    KpiLoopError,
    MissingClassWarning,
    NoLabels,
    NotQueried,
    RangeQueryError,
    UnknownPoint,
    UnknownSession,
)
from .evaluate import evaluate
from .features import featurize
from .iforest import classify, dumps, load_model, score, train
from .synth import SynthSpec, synth_generate
from .timeseries import TimeSeries, fill_gaps, load_csv
from ._kernels import BACKEND

SESSION_FILE = "session.json"
LABELS_FILE = "labels.log"
HISTOGRAM_BINS = 40

CONFIG_DEFAULTS = {
    "strategy": "TA",
    "update": "TW+O",
    "budget_fraction": 0.01,
    "trees": 100,
    "subsample": 256,
    "contamination": 0.03,
    "seed": 0,
    "k": 7,
    "context_seconds": 7200,
}

_STATUS = {
    "unknown_session": 404,
    "unknown_point": 404,
    "range_error": 416,
}


def _validate_config(raw: dict) -> dict:
    unknown = set(raw) - set(CONFIG_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    config = {**CONFIG_DEFAULTS, **raw}
    if config["strategy"] not in QUERY_STRATEGIES:
        raise ConfigError(f"strategy must be one of {QUERY_STRATEGIES}")
    if config["update"] not in UPDATE_STRATEGIES:
        raise ConfigError(f"update must be one of {UPDATE_STRATEGIES}")
    if not 0.0 <= float(config["budget_fraction"]) <= 1.0:
        raise ConfigError("budget_fraction must lie in [0, 1]")
    for key in ("trees", "subsample", "seed", "k", "context_seconds"):
        config[key] = int(config[key])
    config["budget_fraction"] = float(config["budget_fraction"])
    config["contamination"] = float(config["contamination"])
    return config


def _load_series(dataset: dict) -> TimeSeries:
    kind = dataset.get("kind")
    if kind == "synth":
        spec = SynthSpec.from_dict({k: v for k, v in dataset.items() if k != "kind"})
        return synth_generate(spec)
    if kind == "csv":
        if "path" not in dataset:
            raise DatasetError("csv dataset needs 'path'")
        return fill_gaps(load_csv(dataset["path"]))
    raise DatasetError("dataset kind must be 'synth' or 'csv'")


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class Session:
    """One labeling loop: dataset, forest, pool state, and its disk mirror."""

    def __init__(self, directory: Path, dataset: dict, config: dict):
        self.lock = threading.RLock()
        self.directory = directory
        self.id = directory.name
        self.dataset = dataset
        self.config = config
        self.ts = _load_series(dataset)
        self.features = featurize(self.ts)
        self.round = 0
        self.queried: list[int] = []  # current batch, as drawn
        self.labels: dict[int, int] = {}  # all expert labels, any round
        self.round_labels: dict[int, int] = {}  # submitted since last update
        self.forest = None
        self.scores = None
        self._history: list[dict] | None = None

    # -- setup and persistence ------------------------------------------

    @classmethod
    def create(cls, directory: Path, dataset: dict, config: dict) -> "Session":
        session = cls(directory, dataset, config)
        session.forest = train(
            session.features,
            trees=config["trees"],
            subsample=config["subsample"],
            contamination=config["contamination"],
            seed=config["seed"],
        )
        session.scores = score(session.forest, session.features.rows)
        directory.mkdir(parents=True, exist_ok=False)
        _atomic_write(session.model_path(0), dumps(session.forest).encode())
        (directory / LABELS_FILE).touch()
        session.save_state()
        return session

    @classmethod
    def load(cls, directory: Path) -> "Session":
        state = json.loads((directory / SESSION_FILE).read_text())
        session = cls(directory, state["dataset"], state["config"])
        session.round = int(state["round"])
        session.forest = load_model(session.model_path(session.round))
        session.scores = score(session.forest, session.features.rows)
        batch = [int(i) for i in state.get("queried", [])]
        for line in (directory / LABELS_FILE).read_text().splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            index, label = int(event["index"]), int(event["label"])
            session.labels[index] = label
            if int(event["round"]) == session.round:
                session.round_labels[index] = label
        session.queried = [i for i in batch if i not in session.labels]
        return session

    def model_path(self, round_index: int) -> Path:
        return self.directory / f"model_round_{round_index:03d}.json"

    def save_state(self) -> None:
        doc = {
            "id": self.id,
            "dataset": self.dataset,
            "config": self.config,
            "round": self.round,
            "queried": self.queried,
        }
        data = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        _atomic_write(self.directory / SESSION_FILE, data)

    def append_label(self, index: int, label: int) -> None:
        line = json.dumps(
            {"round": self.round, "index": index, "label": label},
            sort_keys=True,
            separators=(",", ":"),
        )
        with open(self.directory / LABELS_FILE, "a") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    # -- views ------------------------------------------------------------

    def eligible_mask(self) -> np.ndarray:
        mask = ~self.ts.synthetic_mask
        if self.labels:
            mask[list(self.labels)] = False
        return mask

    def describe(self) -> dict:
        n = self.ts.n
        labeled = len(self.labels)
        queried = len(self.queried)
        return {
            "id": self.id,
            "dataset": self.dataset,
            "config": self.config,
            "round": self.round,
            "offset": self.forest.offset,
            "n": n,
            "backend": BACKEND,
            "has_ground_truth": self.ts.labels is not None,
            "counts": {
                "unlabeled": n - labeled - queried,
                "queried": queried,
                "labeled": labeled,
            },
        }

    def draw_queries(self) -> dict:
        if not self.queried and not self.round_labels:
            eligible = self.eligible_mask()
            pool = int(eligible.sum())
            b = min(math.ceil(self.config["budget_fraction"] * pool), pool)
            if b > 0:
                batch = make_batch(
                    self.config["strategy"],
                    self.scores,
                    self.forest.offset,
                    b,
                    eligible,
                    seed=derive_round_seed(self.config["seed"], self.round),
                )
                self.queried = [int(i) for i in batch.indices]
                self.save_state()
        context = self._context_points()
        return {
            "round": self.round,
            "strategy": self.config["strategy"],
            "delta": self.forest.offset,
            "budget": len(self.queried) + len(self.round_labels),
            "batch": [self._query_card(i, context) for i in self.queried],
        }

    def _context_points(self) -> int:
        interval = max(self.ts.sampling_interval, 1)
        return max(1, math.ceil(self.config["context_seconds"] / interval))

    def _query_card(self, index: int, context: int) -> dict:
        lo = max(0, index - context)
        hi = min(self.ts.n, index + context + 1)
        return {
            "index": index,
            "timestamp": int(self.ts.timestamps[index]),
            "value": float(self.ts.values[index]),
            "score": float(self.scores[index]),
            "context": {
                "start": lo,
                "timestamps": self.ts.timestamps[lo:hi].tolist(),
                "values": self.ts.values[lo:hi].tolist(),
                "scores": self.scores[lo:hi].tolist(),
            },
        }

    def submit_labels(self, entries: list) -> dict:
        if not isinstance(entries, list) or not entries:
            raise InvalidLabel("labels must be a non-empty list")
        parsed = []
        seen = set()
        queried = set(self.queried)
        for entry in entries:
            try:
                index, label = int(entry["index"]), int(entry["label"])
            except (TypeError, KeyError, ValueError) as exc:
                raise InvalidLabel(f"bad label entry {entry!r}") from exc
            if label not in (0, 1):
                raise InvalidLabel(f"label for point {index} must be 0 or 1")
            if not 0 <= index < self.ts.n:
                raise UnknownPoint(f"point {index} is outside the series")
            if index in self.labels or index in seen:
                raise NotQueried(f"point {index} is already labeled")
            if index not in queried:
                raise NotQueried(f"point {index} was not queried")
            seen.add(index)
            parsed.append((index, label))
        for index, label in parsed:
            self.append_label(index, label)
            self.labels[index] = label
            self.round_labels[index] = label
            self.queried.remove(index)
        return {
            "accepted": len(parsed),
            "labeled_total": len(self.labels),
            "queried_remaining": len(self.queried),
        }

    def _histogram(self, scores: np.ndarray) -> dict:
        counts, edges = np.histogram(scores, bins=HISTOGRAM_BINS, range=(0.0, 1.0))
        return {"edges": edges.tolist(), "counts": counts.tolist()}

    def _f1_entry(self, round_index: int, offset: float, scores) -> dict:
        entry = {
            "round": round_index,
            "offset": offset,
            "f1": None,
            "precision": None,
            "recall": None,
        }
        if self.ts.labels is not None:
            report = evaluate(
                self.ts.labels,
                (np.asarray(scores) >= offset).astype(np.int8),
                self.config["k"],
            )
            entry.update(
                f1=report.f1, precision=report.precision, recall=report.recall
            )
        return entry

    def apply_round(self) -> dict:
        if not self.round_labels:
            raise NoLabels("no labels submitted this round")
        indices = np.array(sorted(self.round_labels), dtype=np.int64)
        labeled = LabeledSet(
            indices,
            np.array([self.round_labels[i] for i in indices], dtype=np.int8),
            self.scores[indices],
        )
        before = self._f1_entry(self.round, self.forest.offset, self.scores)
        hist_before = self._histogram(self.scores)
        # the response's missing_class field already reports this
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MissingClassWarning)
            result = apply_update(
                self.forest, self.features, labeled, self.config["update"]
            )
        self.forest = result.forest
        self.scores = score(self.forest, self.features.rows)
        self.round += 1
        self.round_labels = {}
        self.queried = []
        _atomic_write(self.model_path(self.round), dumps(self.forest).encode())
        self.save_state()
        after = self._f1_entry(self.round, self.forest.offset, self.scores)
        if self._history is not None:
            self._history.append(after)
        return {
            "round": self.round,
            "strategy": result.strategy,
            "old_offset": result.old_offset,
            "new_offset": result.new_offset,
            "missing_class": result.missing_class,
            "histogram_before": hist_before,
            "histogram_after": self._histogram(self.scores),
            "f1_before": before["f1"],
            "f1_after": after["f1"],
            "precision_before": before["precision"],
            "precision_after": after["precision"],
            "recall_before": before["recall"],
            "recall_after": after["recall"],
        }

    def series_slice(self, start: int | None, stop: int | None) -> dict:
        n = self.ts.n
        start = 0 if start is None else start
        stop = n if stop is None else stop
        if not 0 <= start < stop <= n:
            raise RangeQueryError(
                f"range [{start}, {stop}) is not within [0, {n})"
            )
        labeled = [
            {"index": i, "label": self.labels[i]}
            for i in sorted(self.labels)
            if start <= i < stop
        ]
        synth = self.ts.synthetic_mask[start:stop]
        return {
            "from": start,
            "to": stop,
            "n": n,
            "round": self.round,
            "delta": self.forest.offset,
            "timestamps": self.ts.timestamps[start:stop].tolist(),
            "values": self.ts.values[start:stop].tolist(),
            "scores": self.scores[start:stop].tolist(),
            "queried": [i for i in self.queried if start <= i < stop],
            "labels": labeled,
            "synthetic": (np.flatnonzero(synth) + start).tolist(),
        }

    def metrics(self) -> dict:
        if self._history is None:
            history = []
            for r in range(self.round + 1):
                forest = (
                    self.forest if r == self.round else load_model(self.model_path(r))
                )
                scores = (
                    self.scores if r == self.round else score(forest, self.features.rows)
                )
                history.append(self._f1_entry(r, forest.offset, scores))
            self._history = history
        current = self._history[-1]
        anomalies = sum(1 for v in self.labels.values() if v == 1)
        return {
            "round": self.round,
            "offset": self.forest.offset,
            "has_ground_truth": self.ts.labels is not None,
            "labeled_total": len(self.labels),
            "labeled_anomalous": anomalies,
            "labeled_normal": len(self.labels) - anomalies,
            "f1": current["f1"],
            "precision": current["precision"],
            "recall": current["recall"],
            "history": list(self._history),
        }

    def snapshot_bytes(self) -> bytes:
        return self.model_path(self.round).read_bytes()


class SessionStore:
    def __init__(self, root: Path):
        self.root = root
        self.lock = threading.Lock()
        self.sessions: dict[str, Session] = {}
        root.mkdir(parents=True, exist_ok=True)

    def create(self, dataset: dict, config: dict) -> Session:
        if not isinstance(dataset, dict):
            raise DatasetError("payload needs a 'dataset' mapping")
        session_id = uuid.uuid4().hex[:12]
        session = Session.create(self.root / session_id, dataset, config)
        with self.lock:
            self.sessions[session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self.lock:
            if session_id in self.sessions:
                return self.sessions[session_id]
        directory = self.root / session_id
        if not (directory / SESSION_FILE).is_file():
            raise UnknownSession(f"no session {session_id!r}")
        session = Session.load(directory)
        with self.lock:
            return self.sessions.setdefault(session_id, session)

    def ids(self) -> list[str]:
        on_disk = {
            p.name for p in self.root.iterdir() if (p / SESSION_FILE).is_file()
        }
        with self.lock:
            return sorted(on_disk | set(self.sessions))


def create_app(data_dir: str | Path = "sessions", ui_dir: str | Path | None = None):
    store = SessionStore(Path(data_dir))
    app = FastAPI(title="kpiloop labeling service", version="0.1.0")

    @app.exception_handler(KpiLoopError)
    async def _kpi_error(request: Request, exc: KpiLoopError):
        status = _STATUS.get(exc.code, 400)
        return JSONResponse(
            status_code=status,
            content={"error": {"code": exc.code, "message": str(exc)}},
        )

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict):
        dataset = payload.get("dataset")
        if not isinstance(dataset, dict):
            raise DatasetError("payload needs a 'dataset' mapping")
        config = _validate_config(payload.get("config") or {})
        session = store.create(dataset, config)
        with session.lock:
            return session.describe()

    @app.get("/sessions")
    def list_sessions():
        out = []
        for session_id in store.ids():
            session = store.get(session_id)
            with session.lock:
                out.append(session.describe())
        return {"sessions": out}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return session.describe()

    @app.get("/sessions/{session_id}/queries")
    def get_queries(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return session.draw_queries()

    @app.post("/sessions/{session_id}/labels")
    def post_labels(session_id: str, payload: dict):
        session = store.get(session_id)
        with session.lock:
            return session.submit_labels(payload.get("labels"))

    @app.post("/sessions/{session_id}/rounds")
    def post_round(session_id: str, payload: dict | None = None):
        session = store.get(session_id)
        with session.lock:
            return session.apply_round()

    @app.get("/sessions/{session_id}/series")
    def get_series(
        session_id: str,
        from_: int | None = Query(None, alias="from"),
        to: int | None = Query(None),
    ):
        session = store.get(session_id)
        with session.lock:
            return session.series_slice(from_, to)

    @app.get("/sessions/{session_id}/metrics")
    def get_metrics(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return session.metrics()

    @app.get("/sessions/{session_id}/snapshot")
    def get_snapshot(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return Response(
                content=session.snapshot_bytes(), media_type="application/json"
            )

    dist = Path(ui_dir) if ui_dir else Path("frontend") / "dist"
    if dist.is_dir():
        app.mount("/", StaticFiles(directory=dist, html=True), name="ui")

    return app
