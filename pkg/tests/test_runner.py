import pytest

from vidal.model import VideoMeta
from vidal.runner import run_simulation
from vidal.simulate import LearningDecay, NoiseProfile, NoiseRange, make_synthetic_video
from vidal.strategy import StrategyConfig, StrategyKind

META = VideoMeta(48, 48, 60, ("a", "b"))


def world(seed=0, static=False):
    gt = make_synthetic_video(META, seed=seed, static=static)
    profile = NoiseProfile(
        (
            NoiseRange(0, 20, p_miss=0.05, jitter_sigma=0.05),
            NoiseRange(20, 40, p_miss=0.4, jitter_sigma=0.4, p_spurious=1.0),
            NoiseRange(40, 60, p_miss=0.05, jitter_sigma=0.05),
        )
    )
    return gt, profile, LearningDecay(d0=10, floor=0.05)


class TestRunSimulation:
    def test_runs_and_reports(self):
        gt, profile, decay = world()
        result = run_simulation(
            gt, META, profile, decay,
            StrategyConfig(kind=StrategyKind.S1_DYNAMIC, batch_size=10),
            iterations=3, seed=1,
        )
        assert len(result.rounds) == 4  # guiding round + 3 query rounds
        assert result.rounds[0].labeled_count == 10
        assert result.rounds[-1].labeled_count == 40
        for outcome in result.rounds:
            assert 0.0 <= outcome.test_map <= 1.0
        document = result.to_document(seed=1)
        assert document["schema"] == "vidal.report.v1"
        assert len(document["map_series"]) == 4

    def test_deterministic(self):
        gt, profile, decay = world()
        config = StrategyConfig(kind=StrategyKind.S2, batch_size=10, rng_seed=5)
        a = run_simulation(gt, META, profile, decay, config, iterations=2, seed=5)
        b = run_simulation(gt, META, profile, decay, config, iterations=2, seed=5)
        assert a.map_series == b.map_series
        assert [r.queried for r in a.rounds] == [r.queried for r in b.rounds]

    def test_stops_at_stop_fraction(self):
        gt, profile, decay = world()
        result = run_simulation(
            gt, META, profile, decay,
            StrategyConfig(kind=StrategyKind.PASSIVE, batch_size=10, rng_seed=0),
            iterations=50, seed=0,
        )
        assert result.state.stopped
        assert len(result.state.labeled) == result.state.stop_target

    def test_map_improves_with_labels(self):
        gt, profile, decay = world()
        result = run_simulation(
            gt, META, profile, decay,
            StrategyConfig(kind=StrategyKind.S2, batch_size=10),
            iterations=4, seed=3,
        )
        assert result.map_series[-1] > result.map_series[0]

    def test_requires_full_ground_truth(self):
        gt, profile, decay = world()
        with pytest.raises(ValueError, match="ground truth"):
            run_simulation(
                gt[:-1], META, profile, decay, StrategyConfig(), iterations=1, seed=0
            )
