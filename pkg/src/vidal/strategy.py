"""Score aggregation, the weight curve, and query batch selection.

Five query strategies are supported: passive (seeded random), classification
only, inconsistency aggregation with a dynamic or fixed balance parameter,
and summation aggregation. All selection is deterministic: ties break toward
the lower frame index and passive sampling is driven by an explicit seed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from vidal.scoring import FrameScoreBundle

# Lower clamp for the balance parameter; a zero ratio would erase the
# classification term entirely instead of merely dominating it.
MU_FLOOR = 1e-9


class StrategyKind(str, enum.Enum):
    PASSIVE = "passive"
    CLASSIFICATION_ONLY = "classification_only"
    S1_DYNAMIC = "s1_dynamic"
    S1_FIXED = "s1_fixed"
    S2 = "s2"


@dataclass(frozen=True)
class StrategyConfig:
    """Query strategy plus the engine knobs that travel with a run.

    ``fixed_mu`` is only consulted by the fixed-balance strategy;
    ``rng_seed`` only by passive sampling. ``confidence_threshold`` gates
    which detector outputs count as detected instances, and
    ``test_neighbors`` controls whether held-out test frames may serve as
    temporal neighbors for the box-discontinuity signal.
    """

    kind: StrategyKind = StrategyKind.S1_DYNAMIC
    fixed_mu: float = 1.0
    batch_size: int = 10
    rng_seed: int = 0
    confidence_threshold: float = 0.5
    test_neighbors: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if self.fixed_mu <= 0:
            raise ValueError(f"fixed mu must be > 0, got {self.fixed_mu}")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError(f"confidence threshold must be in [0, 1], got {self.confidence_threshold}")


@dataclass(frozen=True)
class WeightCurve:
    """Per-frame selection weight in [0, 1].

    Zero exactly at every guiding frame, one at the midpoint between two
    consecutive guiding frames, linear in between.
    """

    weights: np.ndarray = field(repr=False)

    def __getitem__(self, frame_index: int) -> float:
        return float(self.weights[frame_index])

    def __len__(self) -> int:
        return len(self.weights)


def build_weight_curve(guiding: list[int], num_frames: int) -> WeightCurve:
    """Build the weight curve for the current guiding (labeled) frame set.

    Between consecutive guiding frames g_a < g_b the weight is
    2 * min(i - g_a, g_b - i) / (g_b - g_a). Outside the outermost guiding
    frames the weight ramps up as distance divided by half the mean guiding
    gap, clamped to 1; this region is unreachable with the default initial
    set, which pins both video endpoints.
    """
    if not guiding:
        raise ValueError("weight curve needs at least one guiding frame")
    nodes = sorted(set(guiding))
    if nodes[0] < 0 or nodes[-1] >= num_frames:
        raise ValueError(f"guiding frames out of range [0, {num_frames})")
    weights = np.zeros(num_frames)
    for g_a, g_b in zip(nodes, nodes[1:]):
        for i in range(g_a + 1, g_b):
            weights[i] = 2.0 * min(i - g_a, g_b - i) / (g_b - g_a)
    if len(nodes) > 1:
        mean_gap = (nodes[-1] - nodes[0]) / (len(nodes) - 1)
    else:
        mean_gap = float(num_frames)
    ramp = max(1, math.ceil(mean_gap / 2.0))
    for i in range(0, nodes[0]):
        weights[i] = min(1.0, (nodes[0] - i) / ramp)
    for i in range(nodes[-1] + 1, num_frames):
        weights[i] = min(1.0, (i - nodes[-1]) / ramp)
    return WeightCurve(weights)


def aggregate_s1(delta_h: float, delta_n: float, c: float, mu: float) -> float:
    """Inconsistency aggregation: |max(dh, dn) - mu * c|.

    Large when the localization and classification uncertainties disagree;
    a frame where both components agree the model is uncertain (or certain)
    scores low.
    """
    return abs(max(delta_h, delta_n) - mu * c)


def aggregate_s2(delta_h: float, delta_n: float, c: float) -> float:
    """Summation aggregation: max(dh, dn) + c."""
    return max(delta_h, delta_n) + c


def compute_mu(bundles: list[FrameScoreBundle]) -> float:
    """Balance parameter for the current iteration.

    Mean localization uncertainty of the unlabeled frames divided by their
    mean classification uncertainty, each frame summarized at its most
    informative class. A zero classification mean yields mu = 1; the result
    is clamped below at MU_FLOOR so it stays strictly positive.
    """
    if not bundles:
        raise ValueError("cannot compute mu over an empty unlabeled set")
    loc = [float(np.max(np.maximum(b.dh, b.dn))) for b in bundles]
    cls = [float(np.max(b.c)) for b in bundles]
    cls_mean = math.fsum(cls) / len(cls)
    if cls_mean == 0.0:
        return 1.0
    loc_mean = math.fsum(loc) / len(loc)
    return max(MU_FLOOR, loc_mean / cls_mean)


def aggregate_bundles(
    bundles: list[FrameScoreBundle], config: StrategyConfig
) -> tuple[list[FrameScoreBundle], float]:
    """Fill per-class aggregated scores and frame scores for one iteration.

    Returns the completed bundles plus the balance parameter that was used
    (1.0 for strategies that have none). Passive bundles get all-zero
    scores: passive selection assigns no informativeness.
    """
    kind = config.kind
    if kind == StrategyKind.S1_DYNAMIC:
        mu = compute_mu(bundles)
    elif kind == StrategyKind.S1_FIXED:
        mu = config.fixed_mu
    else:
        mu = 1.0

    out = []
    for b in bundles:
        if kind in (StrategyKind.S1_DYNAMIC, StrategyKind.S1_FIXED):
            s = np.abs(np.maximum(b.dh, b.dn) - mu * b.c)
        elif kind == StrategyKind.S2:
            s = np.maximum(b.dh, b.dn) + b.c
        elif kind == StrategyKind.CLASSIFICATION_ONLY:
            s = b.c.copy()
        else:
            s = np.zeros_like(b.c)
        out.append(replace(b, s=s, frame_score=float(np.max(s))))
    return out, mu


def select_top(scores: dict[int, float], batch_size: int) -> list[int]:
    """Pick the highest-scoring frames, ties broken by lower frame index.

    Returned in descending score order. Invariant under multiplying every
    score by the same positive constant.
    """
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [frame for frame, _ in ranked[:batch_size]]


def weighted_select(
    bundles: list[FrameScoreBundle],
    weights: WeightCurve,
    config: StrategyConfig,
    unlabeled: set[int],
) -> list[int]:
    """Select the query batch from the unlabeled pool.

    Scoring strategies rank by the weighted score S * w; passive draws a
    seeded uniform sample without replacement. If the pool is smaller than
    the batch size the whole pool is returned.
    """
    if not unlabeled:
        raise ValueError("cannot select from an empty unlabeled set")
    pool = sorted(unlabeled)
    size = min(config.batch_size, len(pool))
    if config.kind == StrategyKind.PASSIVE:
        rng = np.random.default_rng(config.rng_seed)
        return [int(f) for f in rng.choice(pool, size=size, replace=False)]

    by_frame = {b.frame_index: b for b in bundles}
    missing = [f for f in pool if f not in by_frame]
    if missing:
        raise ValueError(f"no score bundle for unlabeled frames {missing[:5]}")
    if any(by_frame[f].frame_score is None for f in pool):
        raise ValueError("bundles must be aggregated before selection")
    weighted = {f: by_frame[f].frame_score * weights[f] for f in pool}
    return select_top(weighted, size)
