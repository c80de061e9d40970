"""Command-line entry points.

Subcommands: `bench run` (experiment grid), `bench synth` (labeled
synthetic series), `bench eval` (delay-adjusted F1 of a prediction file),
`serve` (labeling service over HTTP), and `oracle` (drives a service
session by answering queries from ground truth).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import urllib.error
import urllib.request
from pathlib import Path

import yaml

from .bench import load_config, run_experiment
from .errors import DatasetError, KpiLoopError
from .evaluate import DEFAULT_DELAY, evaluate
from .synth import SynthSpec, synth_generate
from .timeseries import fill_gaps, load_csv, write_csv


def _cmd_bench_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = type(config)(**{**config.__dict__, "seeds": (args.seed,)})
    if args.jobs is not None:
        config = type(config)(**{**config.__dict__, "jobs": args.jobs})
    table = run_experiment(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table.write_csv(out_dir / "results.csv")
    text = table.render_text()
    (out_dir / "table.txt").write_text(text + "\n")
    print(text)
    print(f"\n{len(table.rows)} rows -> {out_dir / 'results.csv'}")
    return 0


def _cmd_bench_synth(args) -> int:
    with open(args.spec) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise DatasetError("spec file must be a mapping")
    ts = synth_generate(SynthSpec.from_dict(raw))
    write_csv(ts, args.out)
    print(
        f"{ts.id}: {ts.n} points, {int(ts.labels.sum())} anomalous"
        f" -> {args.out}"
    )
    return 0


def _cmd_bench_eval(args) -> int:
    truth = load_csv(args.truth)
    pred = load_csv(args.pred)
    if truth.labels is None:
        raise DatasetError(f"{args.truth} has no label column")
    if pred.labels is None:
        raise DatasetError(f"{args.pred} has no label column")
    if truth.n != pred.n or (truth.timestamps != pred.timestamps).any():
        raise DatasetError("truth and prediction timestamps do not match")
    report = evaluate(truth.labels, pred.labels, args.delay)
    print(report.to_json() if args.json else report.render_text())
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host = args.host or os.environ.get("KPILOOP_HOST", "127.0.0.1")
    port = args.port or int(os.environ.get("KPILOOP_PORT", "8001"))
    data_dir = args.data_dir or os.environ.get("KPILOOP_DATA_DIR", "sessions")
    app = create_app(data_dir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def _http(method: str, url: str, payload: dict | None = None) -> dict:
    data = None if payload is None else json.dumps(payload).encode()
    req = urllib.request.Request(
        url, data=data, method=method, headers={"Content-Type": "application/json"}
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return json.loads(resp.read().decode())
    except urllib.error.HTTPError as exc:
        body = exc.read().decode(errors="replace")
        raise KpiLoopError(f"{method} {url} -> {exc.code}: {body}") from exc


def _oracle_series(session: dict):
    dataset = session["dataset"]
    kind = dataset.get("kind")
    if kind == "synth":
        spec = {k: v for k, v in dataset.items() if k != "kind"}
        return synth_generate(SynthSpec.from_dict(spec))
    if kind == "csv":
        # mirror the service's gap filling so point indices line up
        return fill_gaps(load_csv(dataset["path"]))
    raise DatasetError(f"oracle cannot reconstruct dataset kind {kind!r}")


def _cmd_oracle(args) -> int:
    base = args.url.rstrip("/")
    if args.create:
        with open(args.create) as fh:
            payload = json.load(fh)
        session = _http("POST", f"{base}/sessions", payload)
        print(f"created session {session['id']}")
    else:
        if not args.session:
            raise KpiLoopError("pass --session ID or --create payload.json")
        session = _http("GET", f"{base}/sessions/{args.session}")
    sid = session["id"]
    ts = _oracle_series(session)
    if ts.labels is None:
        raise DatasetError("oracle needs a dataset with ground-truth labels")
    for _ in range(args.rounds):
        queries = _http("GET", f"{base}/sessions/{sid}/queries")
        batch = queries["batch"]
        if not batch:
            print(f"round {queries['round']}: empty batch, stopping")
            break
        labels = [
            {"index": q["index"], "label": int(ts.labels[q["index"]])}
            for q in batch
        ]
        _http("POST", f"{base}/sessions/{sid}/labels", {"labels": labels})
        summary = _http("POST", f"{base}/sessions/{sid}/rounds", {})
        line = (
            f"round {summary['round']}: offset {summary['old_offset']:.6f}"
            f" -> {summary['new_offset']:.6f}"
        )
        if summary.get("f1_after") is not None:
            line += (
                f", F1 {summary['f1_before']:.4f} -> {summary['f1_after']:.4f}"
            )
        if summary.get("missing_class"):
            line += " (one label class missing, offset kept)"
        print(line)
    if args.snapshot_out:
        req = urllib.request.Request(f"{base}/sessions/{sid}/snapshot")
        with urllib.request.urlopen(req) as resp:
            Path(args.snapshot_out).write_bytes(resp.read())
        print(f"snapshot -> {args.snapshot_out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kpiloop",
        description="Active-learning workbench for KPI anomaly detection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="experiment grid, synthesis, scoring")
    bench_sub = bench.add_subparsers(dest="bench_command", required=True)

    run_p = bench_sub.add_parser("run", help="run the experiment grid")
    run_p.add_argument("--config", required=True, help="YAML grid config")
    run_p.add_argument("--out-dir", default="bench_out")
    run_p.add_argument("--seed", type=int, default=None, help="override seeds")
    run_p.add_argument("--jobs", type=int, default=None, help="parallel cells")
    run_p.set_defaults(func=_cmd_bench_run)

    synth_p = bench_sub.add_parser("synth", help="generate a labeled series")
    synth_p.add_argument("--spec", required=True, help="YAML generator spec")
    synth_p.add_argument("--out", required=True, help="output CSV path")
    synth_p.set_defaults(func=_cmd_bench_synth)

    eval_p = bench_sub.add_parser("eval", help="delay-adjusted F1 of predictions")
    eval_p.add_argument("--truth", required=True, help="CSV with true labels")
    eval_p.add_argument("--pred", required=True, help="CSV with predicted labels")
    eval_p.add_argument("-k", "--delay", type=int, default=DEFAULT_DELAY)
    eval_p.add_argument("--json", action="store_true", help="emit JSON")
    eval_p.set_defaults(func=_cmd_bench_eval)

    serve_p = sub.add_parser("serve", help="run the labeling service")
    serve_p.add_argument("--host", default=None)
    serve_p.add_argument("--port", type=int, default=None)
    serve_p.add_argument("--data-dir", default=None, help="session storage root")
    serve_p.add_argument("--ui-dir", default=None, help="static UI build to serve")
    serve_p.set_defaults(func=_cmd_serve)

    oracle_p = sub.add_parser(
        "oracle", help="label a service session from ground truth"
    )
    oracle_p.add_argument("--url", required=True, help="service base URL")
    oracle_p.add_argument("--session", default=None, help="existing session id")
    oracle_p.add_argument(
        "--create", default=None, help="JSON file with a session-create payload"
    )
    oracle_p.add_argument("--rounds", type=int, default=1)
    oracle_p.add_argument(
        "--snapshot-out", default=None, help="write the post-round model here"
    )
    oracle_p.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KpiLoopError as exc:
        print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
