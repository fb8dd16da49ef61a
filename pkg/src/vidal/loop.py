"""The query-annotate-train loop state machine.

A run owns one video piece: an initial guiding set of evenly spaced frames,
a held-out test split, and then repeated iterations of scoring the unlabeled
frames, querying a batch, ingesting human annotations, and emitting a
training directive, until a fixed fraction of the non-test frames is
annotated. State transitions are functional: every operation returns a new
state, so readers always see a consistent snapshot and persistence is
all-or-nothing.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field, replace

import numpy as np

from vidal.model import (
    FrameDetections,
    GroundTruthFrame,
    VideoMeta,
    class_counts,
    filter_detections,
    gt_as_detections,
    gt_class_counts,
)
from vidal.scoring import (
    FrameScoreBundle,
    bbox_discontinuity,
    classification_score,
    fit_instance_curve,
    instance_discontinuity,
    score_frame,
)
from vidal.strategy import (
    StrategyConfig,
    StrategyKind,
    WeightCurve,
    aggregate_bundles,
    build_weight_curve,
    weighted_select,
)
from vidal.util import ceil_fraction_count, exact_fraction_count, round_half_up


class LoopError(ValueError):
    """Invalid loop operation for the current state."""


class LoopStopped(LoopError):
    """The stop fraction has been reached; no further queries."""


class PendingBatch(LoopError):
    """A queried batch is still awaiting annotations."""


class NotPending(LoopError):
    """Annotation submitted for a frame that is not awaiting one."""


@dataclass(frozen=True)
class QueryRecord:
    """One query round: which frames were asked for and at what score.

    Round 0 is the initial guiding set and carries no scores.
    """

    round_index: int
    frames: tuple[int, ...]
    scores: dict[int, float] | None = None


@dataclass(frozen=True)
class LoopState:
    """Complete, immutable state of one active-learning run.

    ``iteration`` counts fully annotated rounds, the initial guiding round
    included. ``labeled``, ``unlabeled`` and ``test`` partition the frame
    index space at all times; guiding frames stay in ``unlabeled`` until
    their annotations arrive.
    """

    meta: VideoMeta
    strategy: StrategyConfig
    labeled: frozenset[int]
    unlabeled: frozenset[int]
    test: frozenset[int]
    annotations: dict[int, GroundTruthFrame] = field(default_factory=dict)
    history: tuple[QueryRecord, ...] = ()
    iteration: int = 0
    stop_fraction: float = 0.8

    def __post_init__(self) -> None:
        object.__setattr__(self, "labeled", frozenset(self.labeled))
        object.__setattr__(self, "unlabeled", frozenset(self.unlabeled))
        object.__setattr__(self, "test", frozenset(self.test))
        if not 0.0 < self.stop_fraction <= 1.0:
            raise LoopError(f"stop fraction must be in (0, 1], got {self.stop_fraction}")

    @property
    def stop_target(self) -> int:
        """Labeled-frame count at which querying stops."""
        return ceil_fraction_count(self.stop_fraction, self.meta.num_frames - len(self.test))

    @property
    def pending(self) -> frozenset[int]:
        """Frames of the latest query round still awaiting annotation."""
        if not self.history:
            return frozenset()
        return frozenset(self.history[-1].frames) - self.labeled

    @property
    def stopped(self) -> bool:
        return len(self.labeled) >= self.stop_target

    def check_partition(self) -> None:
        """Raise unless labeled/unlabeled/test partition the frame space."""
        m = self.meta.num_frames
        union = self.labeled | self.unlabeled | self.test
        total = len(self.labeled) + len(self.unlabeled) + len(self.test)
        if total != m or union != frozenset(range(m)):
            raise LoopError("labeled/unlabeled/test sets do not partition the frames")
        missing = self.labeled - set(self.annotations)
        if missing:
            raise LoopError(f"labeled frames without annotations: {sorted(missing)[:5]}")
        stray = set(self.annotations) - self.labeled
        if stray:
            raise LoopError(f"annotations for unlabeled frames: {sorted(stray)[:5]}")


def initial_guiding_set(num_frames: int, count: int) -> list[int]:
    """Evenly spaced initial frames, always including both endpoints.

    Index j of count maps to round(j * (m-1) / (count-1)); duplicates (when
    count approaches m) collapse.
    """
    if count < 2:
        raise LoopError(f"guiding set needs at least 2 frames, got {count}")
    if count > num_frames:
        raise LoopError(f"guiding count {count} exceeds {num_frames} frames")
    step = (num_frames - 1) / (count - 1)
    return sorted({round_half_up(j * step) for j in range(count)})


def make_test_split(
    num_frames: int, fraction: float, seed: int, exclude: set[int] | None = None
) -> frozenset[int]:
    """Seeded uniform test sample, disjoint from the guiding frames.

    Guiding frames are exempt so the loop can always initialize.
    """
    if not 0.0 <= fraction < 1.0:
        raise LoopError(f"test fraction must be in [0, 1), got {fraction}")
    exclude = exclude or set()
    count = exact_fraction_count(fraction, num_frames)
    available = sorted(set(range(num_frames)) - exclude)
    if count > len(available):
        raise LoopError(
            f"test split of {count} frames does not fit next to {len(exclude)} guiding frames"
        )
    if count == 0:
        return frozenset()
    rng = np.random.default_rng(seed)
    return frozenset(int(f) for f in rng.choice(available, size=count, replace=False))


def initialize_state(
    meta: VideoMeta,
    strategy: StrategyConfig,
    init_count: int = 10,
    test_fraction: float = 0.1,
    seed: int = 0,
    stop_fraction: float = 0.8,
) -> LoopState:
    """Fresh state: guiding frames queried (round 0), test split held out."""
    guiding = initial_guiding_set(meta.num_frames, init_count)
    test = make_test_split(meta.num_frames, test_fraction, seed, exclude=set(guiding))
    state = LoopState(
        meta=meta,
        strategy=strategy,
        labeled=frozenset(),
        unlabeled=frozenset(range(meta.num_frames)) - test,
        test=test,
        annotations={},
        history=(QueryRecord(0, tuple(guiding), None),),
        iteration=0,
        stop_fraction=stop_fraction,
    )
    state.check_partition()
    return state


@dataclass(frozen=True)
class IterationResult:
    """Output of one scoring-and-query pass."""

    queried: tuple[int, ...]
    report: list[dict]
    mu: float
    weights: WeightCurve
    state: LoopState


def run_iteration(
    state: LoopState, detections: Mapping[int, FrameDetections]
) -> IterationResult:
    """Score all unlabeled frames, select a batch, and record the query.

    ``detections`` must cover every unlabeled frame; entries for test frames
    are optional and only serve as temporal neighbors. Labeled frames
    contribute their ground truth (one-hot distributions) as neighbor
    detections. The state's labeled set does not change until the batch is
    annotated via ingest_annotations.
    """
    if state.pending:
        raise PendingBatch(
            f"round {state.history[-1].round_index} still has "
            f"{len(state.pending)} frames awaiting annotation"
        )
    if state.stopped:
        raise LoopStopped(
            f"stopped: {len(state.labeled)} labeled frames meet the target of {state.stop_target}"
        )
    if not state.labeled:
        raise LoopError("no labeled frames: ingest the initial guiding annotations first")

    cfg = state.strategy
    meta = state.meta
    missing = sorted(f for f in state.unlabeled if f not in detections)
    if missing:
        raise LoopError(f"missing detections for unlabeled frames: {missing[:10]}")

    filtered: dict[int, FrameDetections] = {}

    def det_for(f: int) -> FrameDetections | None:
        if f < 0 or f >= meta.num_frames:
            return None
        if f in state.labeled:
            return gt_as_detections(state.annotations[f], meta.num_classes)
        if f in state.test and not cfg.test_neighbors:
            return None
        if f not in detections:
            return None  # test frame without detections
        if f not in filtered:
            filtered[f] = filter_detections(detections[f], cfg.confidence_threshold)
        return filtered[f]

    nodes = [
        (f, gt_class_counts(state.annotations[f], meta.num_classes))
        for f in sorted(state.labeled)
    ]
    curve = fit_instance_curve(nodes, meta.num_frames)
    weights = build_weight_curve(sorted(state.labeled), meta.num_frames)

    grid_cache: dict = {}
    bundles = []
    for f in sorted(state.unlabeled):
        cur = det_for(f)
        prev = det_for(f - 1)
        nxt = det_for(f + 1)
        if prev is None and nxt is None:
            bundles.append(_score_without_neighbors(cur, curve, meta))
        else:
            bundles.append(score_frame(prev, cur, nxt, curve, meta, grid_cache=grid_cache))

    bundles, mu = aggregate_bundles(bundles, cfg)
    remaining = state.stop_target - len(state.labeled)
    batch_cfg = replace(cfg, batch_size=min(cfg.batch_size, remaining))
    queried = weighted_select(bundles, weights, batch_cfg, set(state.unlabeled))

    by_frame = {b.frame_index: b for b in bundles}
    if cfg.kind == StrategyKind.PASSIVE:
        scores = {f: 0.0 for f in queried}
    else:
        scores = {f: by_frame[f].frame_score * weights[f] for f in queried}
    record = QueryRecord(state.iteration, tuple(queried), scores)
    new_state = replace(state, history=state.history + (record,))
    report = scores_report(bundles, weights, meta)
    return IterationResult(tuple(queried), report, mu, weights, new_state)


def _score_without_neighbors(cur, curve, meta) -> FrameScoreBundle:
    # Both neighbors unavailable (test frames excluded from neighbor duty):
    # the box-discontinuity signal has nothing to compare against, so it is
    # zero and only entropy and the count signal remain.
    k = meta.num_classes
    counts = class_counts(cur, k)
    estimates = curve.value(cur.frame_index)
    c = np.array([classification_score(cur, cls) for cls in range(k)])
    dn = np.array(
        [instance_discontinuity(int(counts[i]), float(estimates[i])) for i in range(k)]
    )
    return FrameScoreBundle(cur.frame_index, c, dn, np.zeros(k))


def scores_report(
    bundles: list[FrameScoreBundle], weights: WeightCurve, meta: VideoMeta
) -> list[dict]:
    """Flatten aggregated bundles into the per-frame report rows."""
    report = []
    for b in sorted(bundles, key=lambda b: b.frame_index):
        w = weights[b.frame_index]
        s = b.s if b.s is not None else np.zeros(meta.num_classes)
        frame_score = b.frame_score if b.frame_score is not None else 0.0
        report.append(
            {
                "index": b.frame_index,
                "weight": w,
                "per_class": [
                    {
                        "C": float(b.c[i]),
                        "dn": float(b.dn[i]),
                        "dh": float(b.dh[i]),
                        "S": float(s[i]),
                    }
                    for i in range(meta.num_classes)
                ],
                "frame_score": float(frame_score),
                "weighted_score": float(frame_score) * w,
            }
        )
    return report


def ingest_annotations(state: LoopState, labels: list[GroundTruthFrame]) -> LoopState:
    """Move annotated frames from unlabeled to labeled.

    Every submitted frame must be pending in the latest query round (the
    initial guiding set counts as round 0). Partial batches are accepted;
    the iteration counter advances only once the whole batch is in.
    """
    pending = set(state.pending)
    seen: set[int] = set()
    for gt in labels:
        f = gt.frame_index
        if f in seen:
            raise NotPending(f"duplicate annotation for frame {f} in one submission")
        seen.add(f)
        if f in state.labeled:
            raise NotPending(f"frame {f} is already annotated")
        if f in state.test:
            raise NotPending(f"frame {f} is a test frame and must stay unannotated")
        if f not in pending:
            raise NotPending(f"frame {f} is not in the pending query batch")
        gt.validate_classes(state.meta.num_classes)

    new_labeled = state.labeled | seen
    new_annotations = dict(state.annotations)
    for gt in labels:
        new_annotations[gt.frame_index] = gt
    batch_complete = not (pending - seen)
    new_state = replace(
        state,
        labeled=new_labeled,
        unlabeled=state.unlabeled - seen,
        annotations=new_annotations,
        iteration=state.iteration + 1 if batch_complete else state.iteration,
    )
    new_state.check_partition()
    return new_state


@dataclass(frozen=True)
class TrainingDirective:
    """Incremental training instruction for an external trainer.

    One mini-batch per epoch: the latest queried frames plus a seeded random
    sample of the earlier guiding (labeled) frames, padded when the guiding
    set is small. The queried frames appear in every mini-batch.
    """

    epochs: int
    minibatch_size: int
    learning_rate: float
    batches: tuple[tuple[int, ...], ...]


def training_directive(
    state: LoopState,
    seed: int,
    epochs: int = 10,
    minibatch_size: int = 20,
    learning_rate: float = 0.001,
) -> TrainingDirective:
    """Build the mini-batch schedule for the most recent completed round."""
    if state.iteration == 0:
        raise LoopError("no completed query batch to train on")
    record = state.history[state.iteration - 1]
    batch = sorted(record.frames)
    others = sorted(state.labeled - set(batch))
    sample_size = min(max(0, minibatch_size - len(batch)), len(others))
    rng = np.random.default_rng(seed)
    batches = []
    for _ in range(epochs):
        if sample_size > 0:
            sample = sorted(int(f) for f in rng.choice(others, size=sample_size, replace=False))
        else:
            sample = []
        batches.append(tuple(batch + sample))
    return TrainingDirective(epochs, minibatch_size, learning_rate, tuple(batches))
