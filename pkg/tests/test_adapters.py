import json
import sys

import httpx
import pytest

from vidal import formats
from vidal.adapters import (
    AdapterError,
    ExecAdapter,
    FileAdapter,
    HttpAdapter,
    SyntheticAdapter,
    fetch_detections,
)
from vidal.loop import ingest_annotations, initialize_state
from vidal.model import VideoMeta
from vidal.simulate import LearningDecay, NoiseProfile, make_synthetic_video
from vidal.strategy import StrategyConfig

META = VideoMeta(32, 32, 20, ("a", "b"))


@pytest.fixture()
def world():
    gt = make_synthetic_video(META, seed=2)
    gt_map = {g.frame_index: g for g in gt}
    state = initialize_state(
        META, StrategyConfig(batch_size=5), init_count=4, test_fraction=0.1, seed=2
    )
    state = ingest_annotations(state, [gt_map[f] for f in sorted(state.pending)])
    return gt_map, state


def detections_file(tmp_path, state, gt_map, name="dets.json", drop=()):
    adapter = SyntheticAdapter(
        gt_map, NoiseProfile.uniform(20, p_miss=0.1), LearningDecay(), seed=0
    )
    frames = adapter.fetch(sorted(state.unlabeled | state.test), state)
    for f in drop:
        frames.pop(f, None)
    path = tmp_path / name
    formats.write_document(path, formats.detections_document(frames, state.iteration))
    return path


class TestFileAdapter:
    def test_replays_requested_frames(self, tmp_path, world):
        gt_map, state = world
        path = detections_file(tmp_path, state, gt_map)
        result = fetch_detections(
            FileAdapter(path), set(state.unlabeled), state, optional=set(state.test)
        )
        assert set(result) == state.unlabeled | state.test

    def test_missing_frame_named(self, tmp_path, world):
        gt_map, state = world
        victim = sorted(state.unlabeled)[2]
        path = detections_file(tmp_path, state, gt_map, drop=[victim])
        with pytest.raises(AdapterError, match=str(victim)):
            fetch_detections(FileAdapter(path), set(state.unlabeled), state)

    def test_missing_optional_frame_tolerated(self, tmp_path, world):
        gt_map, state = world
        victim = sorted(state.test)[0]
        path = detections_file(tmp_path, state, gt_map, drop=[victim])
        result = fetch_detections(
            FileAdapter(path), set(state.unlabeled), state, optional=set(state.test)
        )
        assert victim not in result

    def test_unreadable_file(self, tmp_path, world):
        _, state = world
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(AdapterError):
            FileAdapter(path).fetch([0], state)


class TestSyntheticAdapter:
    def test_deterministic(self, world):
        gt_map, state = world
        profile = NoiseProfile.uniform(20, p_miss=0.3, jitter_sigma=0.3)
        a = SyntheticAdapter(gt_map, profile, LearningDecay(d0=5, floor=0.0), seed=4)
        b = SyntheticAdapter(gt_map, profile, LearningDecay(d0=5, floor=0.0), seed=4)
        frames = sorted(state.unlabeled)
        assert a.fetch(frames, state) == b.fetch(frames, state)

    def test_requires_labeled(self, world):
        gt_map, _ = world
        fresh = initialize_state(
            META, StrategyConfig(batch_size=5), init_count=4, test_fraction=0.0, seed=1
        )
        adapter = SyntheticAdapter(
            gt_map, NoiseProfile.uniform(20), LearningDecay(), seed=0
        )
        with pytest.raises(AdapterError):
            adapter.fetch([3], fresh)

    def test_missing_ground_truth(self, world):
        gt_map, state = world
        adapter = SyntheticAdapter(
            {0: gt_map[0]}, NoiseProfile.uniform(20), LearningDecay(), seed=0
        )
        with pytest.raises(AdapterError, match="ground truth"):
            adapter.fetch([5], state)


class TestExecAdapter:
    SCRIPT = """
import json, sys
request = json.load(open("request.json"))
frames = [{"index": i, "detections": []} for i in request["frame_indices"]]
json.dump({"schema": "vidal.detections.v1", "iteration": request["iteration"],
           "frames": frames}, open("detections.json", "w"))
"""

    def test_round_trip(self, tmp_path, world):
        _, state = world
        script = tmp_path / "detector.py"
        script.write_text(self.SCRIPT)
        adapter = ExecAdapter(
            f"{sys.executable} {script}", workdir=tmp_path, state_path=tmp_path / "s.json"
        )
        result = fetch_detections(adapter, {3, 4}, state)
        assert set(result) == {3, 4}
        request = json.loads((tmp_path / "request.json").read_text())
        assert request["iteration"] == state.iteration
        assert request["frame_indices"] == [3, 4]

    def test_nonzero_exit_fails(self, tmp_path, world):
        _, state = world
        script = tmp_path / "boom.py"
        script.write_text("import sys; sys.exit(3)")
        adapter = ExecAdapter(f"{sys.executable} {script}", workdir=tmp_path)
        with pytest.raises(AdapterError, match="exit 3"):
            adapter.fetch([0], state)

    def test_missing_output_fails(self, tmp_path, world):
        _, state = world
        script = tmp_path / "noop.py"
        script.write_text("pass")
        adapter = ExecAdapter(f"{sys.executable} {script}", workdir=tmp_path)
        with pytest.raises(AdapterError, match="detections.json"):
            adapter.fetch([0], state)


class TestHttpAdapter:
    def make_client(self, handler):
        return httpx.Client(transport=httpx.MockTransport(handler))

    def test_round_trip(self, world):
        _, state = world

        def handler(request):
            payload = json.loads(request.content)
            frames = [{"index": i, "detections": []} for i in payload["frame_indices"]]
            return httpx.Response(
                200, json={"schema": "vidal.detections.v1",
                           "iteration": payload["iteration"], "frames": frames},
            )

        adapter = HttpAdapter("http://detector.test/detect", client=self.make_client(handler))
        result = fetch_detections(adapter, {1, 2}, state)
        assert set(result) == {1, 2}

    def test_http_error_status(self, world):
        _, state = world
        adapter = HttpAdapter(
            "http://detector.test/detect",
            client=self.make_client(lambda req: httpx.Response(500)),
        )
        with pytest.raises(AdapterError, match="500"):
            adapter.fetch([0], state)

    def test_unreachable(self, world):
        _, state = world

        def handler(request):
            raise httpx.ConnectError("refused")

        adapter = HttpAdapter("http://detector.test/detect", client=self.make_client(handler))
        with pytest.raises(AdapterError, match="unreachable"):
            adapter.fetch([0], state)

    def test_wrong_schema(self, world):
        _, state = world
        adapter = HttpAdapter(
            "http://detector.test/detect",
            client=self.make_client(
                lambda req: httpx.Response(200, json={"schema": "nope", "frames": []})
            ),
        )
        with pytest.raises(AdapterError, match="schema"):
            adapter.fetch([0], state)
