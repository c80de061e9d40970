import json

import numpy as np
import pytest

fastapi_testclient = pytest.importorskip("fastapi.testclient")
TestClient = fastapi_testclient.TestClient

from kpiloop import SynthSpec, synth_generate
from kpiloop.service import create_app

DATASET = {"kind": "synth", "n": 600, "seed": 11, "anomaly_rate": 0.02}
CONFIG = {
    "strategy": "TA",
    "update": "O",
    "budget_fraction": 0.05,
    "trees": 25,
    "contamination": 0.05,
    "seed": 3,
}


@pytest.fixture()
def client(tmp_path):
    app = create_app(data_dir=tmp_path / "sessions")
    with TestClient(app) as c:
        yield c


def make_session(client, config=None, dataset=None):
    payload = {"dataset": dataset or DATASET, "config": config or CONFIG}
    response = client.post("/sessions", json=payload)
    assert response.status_code == 201
    return response.json()


def ground_truth():
    spec = SynthSpec.from_dict({k: v for k, v in DATASET.items() if k != "kind"})
    return synth_generate(spec).labels


class TestLifecycle:
    def test_create_and_describe(self, client):
        info = make_session(client)
        assert info["n"] == 600
        assert info["round"] == 0
        assert info["has_ground_truth"] is True
        assert info["counts"] == {"unlabeled": 600, "queried": 0, "labeled": 0}
        assert 0.0 < info["offset"] < 1.0
        again = client.get(f"/sessions/{info['id']}").json()
        assert again == info

    def test_listing_contains_session(self, client):
        info = make_session(client)
        ids = [s["id"] for s in client.get("/sessions").json()["sessions"]]
        assert info["id"] in ids

    def test_same_seed_gives_identical_models(self, client):
        a = make_session(client)
        b = make_session(client)
        snap_a = client.get(f"/sessions/{a['id']}/snapshot").content
        snap_b = client.get(f"/sessions/{b['id']}/snapshot").content
        assert snap_a == snap_b

    def test_create_payload_validation(self, client):
        response = client.post("/sessions", json={"config": {}})
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "dataset_error"
        response = client.post(
            "/sessions", json={"dataset": DATASET, "config": {"bogus": 1}}
        )
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "config_error"
        response = client.post(
            "/sessions", json={"dataset": DATASET, "config": {"strategy": "nope"}}
        )
        assert response.status_code == 400

    def test_unknown_session_is_404(self, client):
        response = client.get("/sessions/nope")
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "unknown_session"


class TestQueries:
    def test_batch_size_and_idempotence(self, client):
        info = make_session(client)
        url = f"/sessions/{info['id']}/queries"
        first = client.get(url).json()
        assert first["round"] == 0
        assert len(first["batch"]) == 30  # ceil(0.05 * 600)
        second = client.get(url).json()
        assert [c["index"] for c in second["batch"]] == [
            c["index"] for c in first["batch"]
        ]

    def test_cards_carry_context(self, client):
        info = make_session(client)
        card = client.get(f"/sessions/{info['id']}/queries").json()["batch"][0]
        assert set(card) == {"index", "timestamp", "value", "score", "context"}
        ctx = card["context"]
        assert len(ctx["timestamps"]) == len(ctx["values"]) == len(ctx["scores"])
        offset = card["index"] - ctx["start"]
        assert ctx["values"][offset] == card["value"]

    def test_zero_budget_draws_nothing(self, client):
        info = make_session(client, config={**CONFIG, "budget_fraction": 0.0})
        queries = client.get(f"/sessions/{info['id']}/queries").json()
        assert queries["batch"] == []


class TestLabels:
    def test_partial_then_remaining(self, client):
        info = make_session(client)
        url = f"/sessions/{info['id']}"
        batch = [c["index"] for c in client.get(url + "/queries").json()["batch"]]
        first_three = [{"index": i, "label": 1} for i in batch[:3]]
        result = client.post(url + "/labels", json={"labels": first_three}).json()
        assert result == {
            "accepted": 3,
            "labeled_total": 3,
            "queried_remaining": len(batch) - 3,
        }
        remaining = [c["index"] for c in client.get(url + "/queries").json()["batch"]]
        assert remaining == batch[3:]

    def test_rejections(self, client):
        info = make_session(client)
        url = f"/sessions/{info['id']}"
        batch = [c["index"] for c in client.get(url + "/queries").json()["batch"]]
        unqueried = next(i for i in range(600) if i not in batch)

        def post(labels):
            return client.post(url + "/labels", json={"labels": labels})

        assert post([{"index": unqueried, "label": 0}]).status_code == 400
        assert post([{"index": 600, "label": 0}]).status_code == 404
        assert post([{"index": batch[0], "label": 2}]).status_code == 400
        assert post([]).status_code == 400
        client.post(url + "/labels", json={"labels": [{"index": batch[0], "label": 1}]})
        response = post([{"index": batch[0], "label": 1}])
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "not_queried"

    def test_bad_entry_rejects_whole_request(self, client):
        info = make_session(client)
        url = f"/sessions/{info['id']}"
        batch = [c["index"] for c in client.get(url + "/queries").json()["batch"]]
        mixed = [
            {"index": batch[0], "label": 1},
            {"index": batch[1], "label": 7},
        ]
        assert client.post(url + "/labels", json={"labels": mixed}).status_code == 400
        # the valid half must not have been recorded
        retry = client.post(
            url + "/labels", json={"labels": [{"index": batch[0], "label": 1}]}
        )
        assert retry.status_code == 200


class TestRounds:
    def label_batch(self, client, session_id, truth=None):
        url = f"/sessions/{session_id}"
        batch = client.get(url + "/queries").json()["batch"]
        if truth is None:
            truth = ground_truth()
        labels = [
            {"index": c["index"], "label": int(truth[c["index"]])} for c in batch
        ]
        client.post(url + "/labels", json={"labels": labels})
        return batch

    def test_offset_update_matches_midpoint_of_labeled_scores(self, client):
        info = make_session(client)
        truth = ground_truth()
        batch = self.label_batch(client, info["id"], truth)
        scores = np.array([c["score"] for c in batch])
        flags = np.array([truth[c["index"]] for c in batch])
        assert flags.min() == 0 and flags.max() == 1  # both classes queried
        expected = (scores[flags == 1].min() + scores[flags == 0].max()) / 2.0

        payload = client.post(f"/sessions/{info['id']}/rounds").json()
        assert payload["round"] == 1
        assert payload["missing_class"] is False
        assert payload["old_offset"] == pytest.approx(info["offset"], abs=1e-12)
        assert payload["new_offset"] == pytest.approx(expected, abs=1e-12)
        assert payload["f1_after"] > payload["f1_before"]
        assert len(payload["histogram_after"]["counts"]) == 40

    def test_round_without_labels_rejected(self, client):
        info = make_session(client)
        response = client.post(f"/sessions/{info['id']}/rounds")
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "no_labels"

    def test_missing_class_keeps_offset(self, client):
        info = make_session(client)
        url = f"/sessions/{info['id']}"
        batch = client.get(url + "/queries").json()["batch"]
        all_anomalous = [{"index": c["index"], "label": 1} for c in batch]
        client.post(url + "/labels", json={"labels": all_anomalous})
        payload = client.post(url + "/rounds").json()
        assert payload["missing_class"] is True
        assert payload["new_offset"] == payload["old_offset"]

    def test_next_round_draws_fresh_batch(self, client):
        info = make_session(client)
        first = self.label_batch(client, info["id"])
        client.post(f"/sessions/{info['id']}/rounds")
        second = client.get(f"/sessions/{info['id']}/queries").json()
        assert second["round"] == 1
        overlap = {c["index"] for c in first} & {
            c["index"] for c in second["batch"]
        }
        assert not overlap  # labeled points left the pool

    def test_tw_round_keeps_offset(self, client):
        info = make_session(client, config={**CONFIG, "update": "TW"})
        self.label_batch(client, info["id"])
        payload = client.post(f"/sessions/{info['id']}/rounds").json()
        assert payload["new_offset"] == payload["old_offset"]


class TestSeries:
    def test_slice_contents(self, client):
        info = make_session(client)
        response = client.get(
            f"/sessions/{info['id']}/series", params={"from": 10, "to": 20}
        ).json()
        assert response["from"] == 10 and response["to"] == 20
        assert len(response["values"]) == 10
        assert len(response["scores"]) == 10
        assert response["n"] == 600
        assert response["synthetic"] == []

    def test_defaults_cover_everything(self, client):
        info = make_session(client)
        response = client.get(f"/sessions/{info['id']}/series").json()
        assert len(response["values"]) == 600

    def test_bad_range_is_416(self, client):
        info = make_session(client)
        for params in ({"from": 20, "to": 10}, {"from": 0, "to": 601}, {"from": -1}):
            response = client.get(f"/sessions/{info['id']}/series", params=params)
            assert response.status_code == 416

    def test_labels_and_queried_reported(self, client):
        info = make_session(client)
        url = f"/sessions/{info['id']}"
        batch = [c["index"] for c in client.get(url + "/queries").json()["batch"]]
        client.post(
            url + "/labels", json={"labels": [{"index": batch[0], "label": 1}]}
        )
        response = client.get(url + "/series").json()
        assert {"index": batch[0], "label": 1} in response["labels"]
        assert batch[0] not in response["queried"]
        assert set(batch[1:]) == set(response["queried"])


class TestMetrics:
    def test_history_grows_with_rounds(self, client):
        info = make_session(client)
        url = f"/sessions/{info['id']}"
        metrics = client.get(url + "/metrics").json()
        assert metrics["round"] == 0
        assert len(metrics["history"]) == 1
        assert metrics["f1"] is not None

        TestRounds().label_batch(client, info["id"])
        client.post(url + "/rounds")
        metrics = client.get(url + "/metrics").json()
        assert metrics["round"] == 1
        assert len(metrics["history"]) == 2
        assert metrics["labeled_total"] == 30
        assert (
            metrics["labeled_anomalous"] + metrics["labeled_normal"]
            == metrics["labeled_total"]
        )


class TestPersistence:
    def test_restart_preserves_everything(self, tmp_path):
        data_dir = tmp_path / "sessions"
        with TestClient(create_app(data_dir=data_dir)) as client:
            info = make_session(client)
            url = f"/sessions/{info['id']}"
            batch = [c["index"] for c in client.get(url + "/queries").json()["batch"]]
            client.post(
                url + "/labels",
                json={"labels": [{"index": i, "label": 1} for i in batch[:4]]},
            )
            snapshot = client.get(url + "/snapshot").content

        with TestClient(create_app(data_dir=data_dir)) as client:
            url = f"/sessions/{info['id']}"
            described = client.get(url).json()
            assert described["round"] == 0
            assert described["counts"]["labeled"] == 4
            remaining = [
                c["index"] for c in client.get(url + "/queries").json()["batch"]
            ]
            assert remaining == batch[4:]
            assert client.get(url + "/snapshot").content == snapshot
            # the replayed labels still feed the next update
            truth = ground_truth()
            client.post(
                url + "/labels",
                json={
                    "labels": [
                        {"index": i, "label": int(truth[i])} for i in batch[4:]
                    ]
                },
            )
            payload = client.post(url + "/rounds").json()
            assert payload["round"] == 1

        with TestClient(create_app(data_dir=data_dir)) as client:
            described = client.get(f"/sessions/{info['id']}").json()
            assert described["round"] == 1
            assert described["counts"]["labeled"] == 30

    def test_snapshot_is_model_file(self, tmp_path):
        data_dir = tmp_path / "sessions"
        with TestClient(create_app(data_dir=data_dir)) as client:
            info = make_session(client)
            snapshot = client.get(f"/sessions/{info['id']}/snapshot").content
        on_disk = (data_dir / info["id"] / "model_round_000.json").read_bytes()
        assert snapshot == on_disk
        json.loads(snapshot)  # snapshot is valid JSON
