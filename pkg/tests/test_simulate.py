import numpy as np
import pytest

from vidal.model import AnnotatedObject, BBox, GroundTruthFrame, VideoMeta
from vidal.scoring import instance_entropy
from vidal.simulate import (
    EffectiveNoise,
    LearningDecay,
    NoiseProfile,
    NoiseRange,
    effective_noise,
    make_synthetic_video,
    softened_onehot,
    synthesize_detections,
)

META = VideoMeta(64, 64, 20, ("a", "b"))


def simple_gt(frame=5, n=3):
    objects = tuple(
        AnnotatedObject(BBox(10 + 12 * i, 20 + 5 * i, 8, 8), i % 2) for i in range(n)
    )
    return GroundTruthFrame(frame, objects)


ZERO = EffectiveNoise(0.0, 0.0, 0.0, 0.0)


class TestNoiseProfile:
    def test_rejects_overlap(self):
        with pytest.raises(ValueError):
            NoiseProfile((NoiseRange(0, 10), NoiseRange(5, 20)))

    def test_validates_coverage(self):
        profile = NoiseProfile((NoiseRange(0, 10), NoiseRange(10, 20)))
        profile.validate_for(20)
        with pytest.raises(ValueError):
            profile.validate_for(25)
        gappy = NoiseProfile((NoiseRange(0, 10), NoiseRange(12, 20)))
        with pytest.raises(ValueError):
            gappy.validate_for(20)

    def test_range_lookup(self):
        profile = NoiseProfile((NoiseRange(0, 10, p_miss=0.1), NoiseRange(10, 20, p_miss=0.9)))
        assert profile.range_for(9).p_miss == 0.1
        assert profile.range_for(10).p_miss == 0.9


class TestEffectiveNoise:
    PROFILE = NoiseProfile.uniform(
        20, p_miss=0.4, p_spurious=2.0, jitter_sigma=0.3, class_temperature=1.0
    )

    def test_labeled_frame_zero_noise(self):
        decay = LearningDecay(d0=10, floor=0.0)
        params = effective_noise(5, self.PROFILE, decay, {5})
        assert params == EffectiveNoise(0.0, 0.0, 0.0, 0.0)

    def test_far_frame_full_noise(self):
        decay = LearningDecay(d0=4, floor=0.0)
        params = effective_noise(15, self.PROFILE, decay, {0})
        assert params.p_miss == 0.4
        assert params.jitter_sigma == 0.3

    def test_half_distance_half_noise(self):
        decay = LearningDecay(d0=8, floor=0.0)
        params = effective_noise(4, self.PROFILE, decay, {0})
        assert params.p_miss == pytest.approx(0.2)
        assert params.p_spurious == pytest.approx(1.0)
        assert params.class_temperature == pytest.approx(0.5)

    def test_floor(self):
        decay = LearningDecay(d0=8, floor=0.25)
        params = effective_noise(0, self.PROFILE, decay, {0})
        assert params.p_miss == pytest.approx(0.1)

    def test_empty_labeled_errors(self):
        with pytest.raises(ValueError):
            effective_noise(0, self.PROFILE, LearningDecay(), set())


class TestSoftenedOnehot:
    def test_zero_temperature_one_hot(self):
        d = softened_onehot(1, 3, 0.0)
        assert d.probs == (0.0, 1.0, 0.0)

    def test_large_temperature_uniform(self):
        d = softened_onehot(0, 4, 1e9)
        assert all(p == pytest.approx(0.25, abs=1e-6) for p in d.probs)
        assert instance_entropy(d) == pytest.approx(1.0, abs=1e-6)

    def test_monotone_in_temperature(self):
        entropies = [
            instance_entropy(softened_onehot(0, 2, t)) for t in (0.1, 0.5, 1.0, 3.0)
        ]
        assert entropies == sorted(entropies)

    def test_tiny_temperature_no_overflow(self):
        d = softened_onehot(0, 2, 1e-6)
        assert d.probs == (1.0, 0.0)


class TestSynthesize:
    def test_zero_noise_identity(self):
        gt = simple_gt()
        out = synthesize_detections(gt, ZERO, META, (0, 5))
        assert len(out) == len(gt.objects)
        for det, obj in zip(out.detections, gt.objects):
            assert det.bbox == obj.bbox
            assert det.probs.probs[obj.class_index] == 1.0

    def test_p_miss_one_empty(self):
        params = EffectiveNoise(1.0, 0.0, 0.0, 0.0)
        out = synthesize_detections(simple_gt(), params, META, (0, 5))
        assert len(out) == 0

    def test_high_temperature_near_uniform(self):
        params = EffectiveNoise(0.0, 0.0, 0.0, 1e9)
        out = synthesize_detections(simple_gt(), params, META, (0, 5))
        for det in out.detections:
            assert instance_entropy(det.probs) == pytest.approx(1.0, abs=1e-6)

    def test_deterministic(self):
        params = EffectiveNoise(0.3, 1.5, 0.2, 0.8)
        a = synthesize_detections(simple_gt(), params, META, (7, 5))
        b = synthesize_detections(simple_gt(), params, META, (7, 5))
        assert a == b

    def test_seed_changes_output(self):
        params = EffectiveNoise(0.3, 1.5, 0.2, 0.8)
        a = synthesize_detections(simple_gt(), params, META, (7, 5))
        b = synthesize_detections(simple_gt(), params, META, (8, 5))
        assert a != b

    def test_spurious_rate(self):
        params = EffectiveNoise(0.0, 3.0, 0.0, 0.0)
        counts = []
        for seed in range(300):
            out = synthesize_detections(simple_gt(), params, META, (seed, 5))
            counts.append(len(out) - 3)
        assert np.mean(counts) == pytest.approx(3.0, abs=0.4)

    def test_jitter_scales_with_sigma(self):
        gt = simple_gt(n=1)
        small = EffectiveNoise(0.0, 0.0, 0.05, 0.0)
        large = EffectiveNoise(0.0, 0.0, 0.5, 0.0)
        drift_small = []
        drift_large = []
        for seed in range(100):
            a = synthesize_detections(gt, small, META, (seed, 1)).detections[0].bbox
            b = synthesize_detections(gt, large, META, (seed, 1)).detections[0].bbox
            ref = gt.objects[0].bbox
            drift_small.append(abs(a.cx - ref.cx))
            drift_large.append(abs(b.cx - ref.cx))
        assert np.mean(drift_large) > 5 * np.mean(drift_small)

    def test_same_draws_scale_with_noise(self):
        # Shrinking the parameters shrinks the corruption without reshuffling:
        # the same object survives or drops consistently when p_miss shrinks.
        gt = simple_gt(n=5)
        full = EffectiveNoise(0.5, 0.0, 0.0, 0.0)
        half = EffectiveNoise(0.25, 0.0, 0.0, 0.0)
        for seed in range(50):
            survivors_full = len(synthesize_detections(gt, full, META, (seed, 2)))
            survivors_half = len(synthesize_detections(gt, half, META, (seed, 2)))
            assert survivors_half >= survivors_full


class TestMakeSyntheticVideo:
    def test_static_video_is_constant(self):
        meta = VideoMeta(64, 64, 12, ("a", "b"))
        frames = make_synthetic_video(meta, seed=3, static=True)
        assert len(frames) == 12
        first = [(o.bbox, o.class_index) for o in frames[0].objects]
        for frame in frames[1:]:
            assert [(o.bbox, o.class_index) for o in frame.objects] == first

    def test_boxes_inside_frame(self):
        meta = VideoMeta(48, 48, 30, ("a", "b", "c"))
        frames = make_synthetic_video(meta, seed=5, speed=2.0)
        for frame in frames:
            for obj in frame.objects:
                x0, y0, x1, y1 = obj.bbox.corners()
                assert x0 >= -1e-6 and y0 >= -1e-6
                assert x1 <= meta.width + 1e-6 and y1 <= meta.height + 1e-6

    def test_deterministic(self):
        meta = VideoMeta(48, 48, 10, ("a", "b"))
        assert make_synthetic_video(meta, seed=9) == make_synthetic_video(meta, seed=9)

    def test_churn_changes_counts(self):
        meta = VideoMeta(48, 48, 60, ("a", "b"))
        frames = make_synthetic_video(meta, seed=1, objects_per_class=4, churn=1.0)
        counts = {len(f.objects) for f in frames}
        assert len(counts) > 1


class TestMonotoneSignal:
    def test_far_frames_noisier_than_near(self):
        # Expected dn/dh grows with distance from the nearest labeled frame.
        from vidal.scoring import fit_instance_curve, score_frame
        from vidal.model import gt_class_counts

        meta = VideoMeta(48, 48, 40, ("a", "b"))
        gt = make_synthetic_video(meta, seed=11, static=True)
        profile = NoiseProfile.uniform(
            40, p_miss=0.3, p_spurious=1.0, jitter_sigma=0.3, class_temperature=0.5
        )
        decay = LearningDecay(d0=20, floor=0.0)
        labeled = {0}
        curve = fit_instance_curve(
            [(0, gt_class_counts(gt[0], 2))], meta.num_frames
        )
        near, far = 4, 36
        near_sig, far_sig = [], []
        for seed in range(1000):
            sigs = []
            for f in (near, far):
                dets = {}
                for i in (f - 1, f, f + 1):
                    params = effective_noise(i, profile, decay, labeled)
                    dets[i] = synthesize_detections(gt[i], params, meta, (seed, i))
                bundle = score_frame(dets[f - 1], dets[f], dets[f + 1], curve, meta)
                sigs.append(float(np.max(bundle.dn) + np.max(bundle.dh)))
            near_sig.append(sigs[0])
            far_sig.append(sigs[1])
        assert np.mean(far_sig) > np.mean(near_sig) + 0.1
