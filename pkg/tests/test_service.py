import pytest
from fastapi.testclient import TestClient

from vidal import formats
from vidal.adapters import SyntheticAdapter
from vidal.loop import ingest_annotations, initialize_state
from vidal.model import VideoMeta
from vidal.simulate import LearningDecay, NoiseProfile, make_synthetic_video
from vidal.service import create_app
from vidal.strategy import StrategyConfig, StrategyKind

META = VideoMeta(32, 32, 30, ("person", "ball"))


@pytest.fixture()
def workbench(tmp_path):
    gt = make_synthetic_video(META, seed=6)
    gt_map = {g.frame_index: g for g in gt}
    state = initialize_state(
        META,
        StrategyConfig(kind=StrategyKind.S2, batch_size=5, rng_seed=6),
        init_count=5,
        test_fraction=0.1,
        seed=6,
    )
    state = ingest_annotations(state, [gt_map[f] for f in sorted(state.pending)])
    state_path = tmp_path / "state.json"
    formats.persist_state(state, state_path)
    adapter = SyntheticAdapter(
        gt_map,
        NoiseProfile.uniform(30, p_miss=0.3, jitter_sigma=0.3, class_temperature=0.8),
        LearningDecay(d0=6, floor=0.0),
        seed=6,
    )
    app = create_app(state_path, adapter=adapter)
    client = TestClient(app)
    return client, state_path, gt_map


def gt_payload(gt):
    return {
        "objects": [
            {"bbox": [o.bbox.cx, o.bbox.cy, o.bbox.bw, o.bbox.bh], "class": o.class_index}
            for o in gt.objects
        ]
    }


class TestStateEndpoint:
    def test_snapshot(self, workbench):
        client, _, _ = workbench
        data = client.get("/api/state").json()
        assert data["iteration"] == 1
        assert data["labeled_count"] == 5
        assert data["num_frames"] == 30
        assert data["can_iterate"] is True
        assert data["strategy"]["kind"] == "s2"


class TestIterateAndQueue:
    def test_iterate_then_queue(self, workbench):
        client, state_path, _ = workbench
        response = client.post("/api/iterate")
        assert response.status_code == 200
        body = response.json()
        assert len(body["queried"]) == 5
        assert len(body["scores"]) > 0

        queue = client.get("/api/queue").json()
        assert queue["pending_count"] == 5
        assert queue["can_iterate"] is False
        assert all(item["status"] == "pending" for item in queue["items"])
        weighted = [item["weighted_score"] for item in queue["items"]]
        assert weighted == sorted(weighted, reverse=True)
        assert all(item["frame_score"] is not None for item in queue["items"])

        # State was persisted before the response.
        on_disk = formats.load_state(state_path)
        assert set(body["queried"]) == set(on_disk.pending)

    def test_double_iterate_conflicts(self, workbench):
        client, _, _ = workbench
        assert client.post("/api/iterate").status_code == 200
        assert client.post("/api/iterate").status_code == 409

    def test_predictions_served_for_queried(self, workbench):
        client, _, _ = workbench
        queried = client.post("/api/iterate").json()["queried"]
        preds = client.get(f"/api/frames/{queried[0]}/predictions").json()
        assert preds["frame_index"] == queried[0]
        assert isinstance(preds["detections"], list)


class TestAnnotationSubmission:
    def test_full_cycle(self, workbench):
        client, state_path, gt_map = workbench
        queried = client.post("/api/iterate").json()["queried"]
        for pos, frame in enumerate(queried):
            response = client.post(
                f"/api/frames/{frame}/annotations", json=gt_payload(gt_map[frame])
            )
            assert response.status_code == 200
            body = response.json()
            assert body["changed"] is True
            assert body["pending_remaining"] == len(queried) - pos - 1
        assert body["iteration_complete"] is True
        assert body["can_iterate"] is True

        queue = client.get("/api/queue").json()
        assert queue["pending_count"] == 0
        assert queue["can_iterate"] is True

        # next iterate produces a fresh batch
        fresh = client.post("/api/iterate").json()["queried"]
        assert not (set(fresh) & set(queried))

    def test_idempotent_double_submission(self, workbench):
        client, state_path, gt_map = workbench
        queried = client.post("/api/iterate").json()["queried"]
        frame = queried[0]
        payload = gt_payload(gt_map[frame])
        first = client.post(f"/api/frames/{frame}/annotations", json=payload)
        assert first.json()["changed"] is True
        second = client.post(f"/api/frames/{frame}/annotations", json=payload)
        assert second.status_code == 200
        assert second.json()["changed"] is False
        assert second.json()["pending_remaining"] == first.json()["pending_remaining"]

    def test_conflicting_resubmission(self, workbench):
        client, _, gt_map = workbench
        queried = client.post("/api/iterate").json()["queried"]
        frame = queried[0]
        client.post(f"/api/frames/{frame}/annotations", json=gt_payload(gt_map[frame]))
        other = {"objects": [{"bbox": [1, 1, 2, 2], "class": 0}]}
        assert client.post(f"/api/frames/{frame}/annotations", json=other).status_code == 409

    def test_non_pending_conflicts(self, workbench):
        client, state_path, gt_map = workbench
        client.post("/api/iterate")
        state = formats.load_state(state_path)
        non_pending = sorted(state.unlabeled - state.pending)[0]
        response = client.post(
            f"/api/frames/{non_pending}/annotations", json=gt_payload(gt_map[non_pending])
        )
        assert response.status_code == 409

    def test_malformed_boxes_rejected(self, workbench):
        client, _, _ = workbench
        queried = client.post("/api/iterate").json()["queried"]
        bad = {"objects": [{"bbox": [1, 2, 3], "class": 0}]}
        response = client.post(f"/api/frames/{queried[0]}/annotations", json=bad)
        assert response.status_code == 422
        negative = {"objects": [{"bbox": [1, 2, -3, 4], "class": 0}]}
        response = client.post(f"/api/frames/{queried[0]}/annotations", json=negative)
        assert response.status_code == 422

    def test_out_of_range_class_rejected(self, workbench):
        client, _, _ = workbench
        queried = client.post("/api/iterate").json()["queried"]
        bad = {"objects": [{"bbox": [1, 2, 3, 4], "class": 9}]}
        response = client.post(f"/api/frames/{queried[0]}/annotations", json=bad)
        assert response.status_code == 422


class TestHistoryAndImages:
    def test_history_grows(self, workbench):
        client, _, gt_map = workbench
        before = client.get("/api/history").json()
        assert len(before["rounds"]) == 1
        queried = client.post("/api/iterate").json()["queried"]
        after = client.get("/api/history").json()
        assert len(after["rounds"]) == 2
        assert after["rounds"][1]["frames"] == queried
        assert after["rounds"][1]["done"] is False

    def test_missing_image_404(self, workbench):
        client, _, _ = workbench
        assert client.get("/api/frames/0/image").status_code == 404

    def test_image_served_from_directory(self, tmp_path, workbench):
        _, state_path, _ = workbench
        images = tmp_path / "imgs"
        images.mkdir()
        (images / "3.png").write_bytes(b"\x89PNG\r\n\x1a\nfake")
        app = create_app(state_path, images_dir=images)
        client = TestClient(app)
        assert client.get("/api/frames/3/image").status_code == 200
        assert client.get("/api/frames/4/image").status_code == 404


class TestServiceRestart:
    def test_sidecars_survive_restart(self, tmp_path, workbench):
        client, state_path, gt_map = workbench
        queried = client.post("/api/iterate").json()["queried"]
        app = create_app(state_path)  # no adapter: read-only restart
        fresh_client = TestClient(app)
        queue = fresh_client.get("/api/queue").json()
        assert {i["frame_index"] for i in queue["items"]} == set(queried)
        assert all(i["frame_score"] is not None for i in queue["items"])
        preds = fresh_client.get(f"/api/frames/{queried[0]}/predictions").json()
        assert preds["frame_index"] == queried[0]
        assert fresh_client.post("/api/iterate").status_code == 400
