import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vidal.model import (
    BBox,
    ClassDistribution,
    Detection,
    FrameDetections,
    GroundTruthFrame,
    AnnotatedObject,
    ValidationError,
    VideoMeta,
    class_counts,
    filter_detections,
    gt_as_detections,
    gt_class_counts,
)


def det(probs, cx=5.0, cy=5.0, bw=2.0, bh=2.0):
    return Detection(BBox(cx, cy, bw, bh), ClassDistribution(tuple(probs)))


class TestVideoMeta:
    def test_valid(self):
        meta = VideoMeta(100, 80, 10, ("person", "ball"))
        assert meta.num_classes == 2

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(width=0, height=10, num_frames=5, class_names=("a", "b")),
            dict(width=10, height=0, num_frames=5, class_names=("a", "b")),
            dict(width=10, height=10, num_frames=1, class_names=("a", "b")),
            dict(width=10, height=10, num_frames=5, class_names=("a",)),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            VideoMeta(**kwargs)


class TestClassDistribution:
    def test_normalizes_within_tolerance(self):
        d = ClassDistribution((0.5, 0.5000001))
        assert sum(d.probs) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_sum(self):
        with pytest.raises(ValidationError):
            ClassDistribution((0.5, 0.6))

    def test_rejects_negative(self):
        with pytest.raises(ValidationError):
            ClassDistribution((-0.1, 1.1))

    def test_argmax_tie_goes_to_lowest_index(self):
        assert ClassDistribution((0.5, 0.5)).argmax() == 0
        assert ClassDistribution((0.25, 0.25, 0.25, 0.25)).argmax() == 0

    def test_argmax(self):
        assert ClassDistribution((0.3, 0.7)).argmax() == 1


class TestBBox:
    def test_rejects_negative_size(self):
        with pytest.raises(ValidationError):
            BBox(0, 0, -1, 1)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValidationError):
            BBox(float("nan"), 0, 1, 1)

    def test_corners(self):
        assert BBox(5, 5, 4, 2).corners() == (3.0, 4.0, 7.0, 6.0)


class TestFilterDetections:
    def test_threshold_zero_keeps_all(self):
        frame = FrameDetections(0, (det([0.6, 0.4]), det([0.5, 0.5])))
        assert len(filter_detections(frame, 0.0)) == 2

    def test_threshold_one_drops_uncertain(self):
        frame = FrameDetections(0, (det([0.9, 0.1]), det([0.6, 0.4])))
        assert len(filter_detections(frame, 1.0)) == 0

    def test_direct_comparison(self):
        frame = FrameDetections(
            0, (det([0.9, 0.1]), det([0.4, 0.6]), det([0.6, 0.4]))
        )
        kept = filter_detections(frame, 0.5)
        assert len(kept) == 3  # max-probs are 0.9, 0.6, 0.6
        kept = filter_detections(frame, 0.7)
        assert len(kept) == 1

    def test_order_preserved(self):
        frame = FrameDetections(0, (det([0.9, 0.1], cx=1), det([0.8, 0.2], cx=2)))
        kept = filter_detections(frame, 0.5)
        assert [d.bbox.cx for d in kept.detections] == [1, 2]

    @given(st.floats(min_value=0, max_value=1))
    def test_idempotent(self, threshold):
        frame = FrameDetections(
            0, (det([0.9, 0.1]), det([0.55, 0.45]), det([0.5, 0.5]))
        )
        once = filter_detections(frame, threshold)
        twice = filter_detections(once, threshold)
        assert once == twice

    def test_rejects_bad_threshold(self):
        with pytest.raises(ValidationError):
            filter_detections(FrameDetections(0, ()), 1.5)


class TestClassCounts:
    def test_empty_frame(self):
        assert class_counts(FrameDetections(0, ()), 3).tolist() == [0, 0, 0]

    def test_all_one_class(self):
        frame = FrameDetections(0, tuple(det([0.9, 0.1]) for _ in range(3)))
        assert class_counts(frame, 2).tolist() == [3, 0]

    def test_argmax_per_row(self):
        frame = FrameDetections(0, (det([0.6, 0.4]), det([0.3, 0.7])))
        assert class_counts(frame, 2).tolist() == [1, 1]

    def test_total_equals_detection_count(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(0, 8))
            dets = []
            for _ in range(n):
                raw = rng.random(3) + 0.01
                dets.append(det(raw / raw.sum()))
            frame = filter_detections(FrameDetections(0, tuple(dets)), 0.4)
            assert class_counts(frame, 3).sum() == len(frame)


class TestGroundTruth:
    def test_counts(self):
        gt = GroundTruthFrame(
            0,
            (
                AnnotatedObject(BBox(1, 1, 1, 1), 0),
                AnnotatedObject(BBox(2, 2, 1, 1), 1),
                AnnotatedObject(BBox(3, 3, 1, 1), 1),
            ),
        )
        assert gt_class_counts(gt, 3).tolist() == [1, 2, 0]

    def test_as_detections_one_hot(self):
        gt = GroundTruthFrame(4, (AnnotatedObject(BBox(1, 1, 1, 1), 1),))
        frame = gt_as_detections(gt, 3)
        assert frame.frame_index == 4
        assert frame.detections[0].probs.probs == (0.0, 1.0, 0.0)

    def test_class_range_validation(self):
        gt = GroundTruthFrame(0, (AnnotatedObject(BBox(1, 1, 1, 1), 5),))
        with pytest.raises(ValidationError):
            gt.validate_classes(2)
