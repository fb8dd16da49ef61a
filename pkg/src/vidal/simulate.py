"""Synthetic detector: corrupts ground truth with controllable noise.

Stands in for a real detector so the full query-annotate loop can run at
desk scale. Noise is specified per frame range (miss rate, spurious rate,
box jitter, class temperature) and scaled down near annotated frames by a
learning-decay ramp, which mimics a model that improves around the frames
it was trained on. All draws are deterministic given (ground truth, noise
parameters, seed): one seeded stream per frame, consumed in a fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from vidal.model import (
    AnnotatedObject,
    BBox,
    ClassDistribution,
    Detection,
    FrameDetections,
    GroundTruthFrame,
    VideoMeta,
)


@dataclass(frozen=True)
class NoiseRange:
    """Corruption parameters for a contiguous frame range [start, end)."""

    start: int
    end: int
    p_miss: float = 0.0
    p_spurious: float = 0.0
    jitter_sigma: float = 0.0
    class_temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.end <= self.start:
            raise ValueError(f"empty noise range [{self.start}, {self.end})")
        if not 0.0 <= self.p_miss <= 1.0:
            raise ValueError(f"p_miss must be in [0, 1], got {self.p_miss}")
        if self.p_spurious < 0 or self.jitter_sigma < 0 or self.class_temperature < 0:
            raise ValueError("noise rates must be non-negative")


@dataclass(frozen=True)
class NoiseProfile:
    """Per-frame-range noise parameters covering a whole video piece."""

    ranges: tuple[NoiseRange, ...]

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.ranges, key=lambda r: r.start))
        for a, b in zip(ordered, ordered[1:]):
            if b.start < a.end:
                raise ValueError(f"noise ranges overlap at frame {b.start}")
        object.__setattr__(self, "ranges", ordered)

    def validate_for(self, num_frames: int) -> None:
        """Ranges must tile [0, num_frames) without gaps."""
        if not self.ranges or self.ranges[0].start != 0 or self.ranges[-1].end != num_frames:
            raise ValueError(f"noise ranges must cover [0, {num_frames})")
        for a, b in zip(self.ranges, self.ranges[1:]):
            if b.start != a.end:
                raise ValueError(f"noise ranges leave a gap at frame {a.end}")

    def range_for(self, frame_index: int) -> NoiseRange:
        for r in self.ranges:
            if r.start <= frame_index < r.end:
                return r
        raise ValueError(f"frame {frame_index} not covered by any noise range")

    @classmethod
    def uniform(cls, num_frames: int, **params) -> "NoiseProfile":
        return cls((NoiseRange(0, num_frames, **params),))


@dataclass(frozen=True)
class LearningDecay:
    """Noise attenuation near labeled frames.

    Every noise parameter is scaled by g(d) = max(floor, min(1, d / d0))
    where d is the distance to the nearest labeled frame. floor = 1 turns
    the decay off entirely.
    """

    d0: float = 1.0
    floor: float = 1.0

    def __post_init__(self) -> None:
        if self.d0 < 1:
            raise ValueError(f"d0 must be >= 1, got {self.d0}")
        if not 0.0 <= self.floor <= 1.0:
            raise ValueError(f"floor must be in [0, 1], got {self.floor}")

    def scale(self, distance: int) -> float:
        return max(self.floor, min(1.0, distance / self.d0))


@dataclass(frozen=True)
class EffectiveNoise:
    """Noise parameters of one frame after learning decay."""

    p_miss: float
    p_spurious: float
    jitter_sigma: float
    class_temperature: float


def effective_noise(
    frame_index: int,
    profile: NoiseProfile,
    decay: LearningDecay,
    labeled: set[int],
) -> EffectiveNoise:
    """Scale the frame's range parameters by distance to the nearest label."""
    if not labeled:
        raise ValueError("effective noise needs a non-empty labeled set")
    base = profile.range_for(frame_index)
    d = min(abs(frame_index - g) for g in labeled)
    g = decay.scale(d)
    return EffectiveNoise(
        p_miss=base.p_miss * g,
        p_spurious=base.p_spurious * g,
        jitter_sigma=base.jitter_sigma * g,
        class_temperature=base.class_temperature * g,
    )


def softened_onehot(true_class: int, num_classes: int, temperature: float) -> ClassDistribution:
    """Temperature-softened one-hot distribution.

    p(true) = 1 / (1 + (k-1) * exp(-1/temperature)); temperature 0 is exactly
    one-hot, temperature -> infinity approaches uniform.
    """
    probs = [0.0] * num_classes
    if temperature <= 0.0 or 1.0 / temperature > 700.0:
        probs[true_class] = 1.0
        return ClassDistribution(tuple(probs))
    off = math.exp(-1.0 / temperature)
    denom = 1.0 + (num_classes - 1) * off
    for i in range(num_classes):
        probs[i] = (1.0 if i == true_class else off) / denom
    return ClassDistribution(tuple(probs))


def _poisson_icdf(lam: float, u: float) -> int:
    """Inverse CDF of Poisson(lam) at u; monotone in lam for a fixed draw."""
    if lam <= 0.0:
        return 0
    p = math.exp(-lam)
    cdf = p
    k = 0
    while u > cdf and k < 10_000:
        k += 1
        p *= lam / k
        cdf += p
    return k


def synthesize_detections(
    gt: GroundTruthFrame,
    params: EffectiveNoise,
    meta: VideoMeta,
    seed,
) -> FrameDetections:
    """Corrupt one frame's ground truth into simulated detector output.

    Each object is independently dropped with p_miss; survivors get their
    center and size jittered by zero-mean noise with std jitter_sigma times
    the box dimension, and a temperature-softened class distribution.
    Poisson(p_spurious) extra boxes are added with uniform random centers,
    area between 0.2x and 1x the mean ground-truth box area, and
    near-uniform class distributions. The per-object draws are consumed
    whether or not the object is dropped, so shrinking the noise parameters
    shrinks the corruption without reshuffling it.
    """
    rng = np.random.default_rng(seed)
    k = meta.num_classes
    detections = []
    for obj in gt.objects:
        u_miss = rng.random()
        dx, dy, dw, dh = rng.normal(size=4)
        if u_miss < params.p_miss:
            continue
        s = params.jitter_sigma
        bbox = BBox(
            cx=obj.bbox.cx + dx * s * obj.bbox.bw,
            cy=obj.bbox.cy + dy * s * obj.bbox.bh,
            bw=max(0.0, obj.bbox.bw * (1.0 + dw * s)),
            bh=max(0.0, obj.bbox.bh * (1.0 + dh * s)),
        )
        probs = softened_onehot(obj.class_index, k, params.class_temperature)
        detections.append(Detection(bbox, probs))

    n_spurious = _poisson_icdf(params.p_spurious, rng.random())
    if n_spurious > 0:
        areas = [o.bbox.bw * o.bbox.bh for o in gt.objects]
        mean_area = float(np.mean(areas)) if areas else (meta.width * meta.height) / 100.0
        for _ in range(n_spurious):
            cx = rng.random() * meta.width
            cy = rng.random() * meta.height
            area = (0.2 + 0.8 * rng.random()) * mean_area
            aspect = 0.5 + 1.5 * rng.random()
            bw = math.sqrt(area * aspect)
            bh = math.sqrt(area / aspect)
            raw = 1.0 + 0.25 * rng.random(k)
            probs = ClassDistribution(tuple(raw / raw.sum()))
            detections.append(Detection(BBox(cx, cy, bw, bh), probs))
    return FrameDetections(gt.frame_index, tuple(detections))


@dataclass(frozen=True)
class DriftingObject:
    """One synthetic object: a box bouncing around the frame.

    Present only during [t_enter, t_exit); entering and leaving objects
    create genuine instance-count discontinuities for the curve to catch.
    """

    class_index: int
    bw: float
    bh: float
    x0: float
    y0: float
    vx: float
    vy: float
    t_enter: int
    t_exit: int

    def at(self, t: int, meta: VideoMeta) -> BBox | None:
        if not self.t_enter <= t < self.t_exit:
            return None
        x = _bounce(self.x0 + self.vx * t, self.bw / 2, meta.width - self.bw / 2)
        y = _bounce(self.y0 + self.vy * t, self.bh / 2, meta.height - self.bh / 2)
        return BBox(x, y, self.bw, self.bh)


def _bounce(p: float, lo: float, hi: float) -> float:
    """Reflect a coordinate into [lo, hi] (triangle wave)."""
    if hi <= lo:
        return (lo + hi) / 2
    span = hi - lo
    q = (p - lo) % (2 * span)
    return lo + (q if q <= span else 2 * span - q)


def make_synthetic_video(
    meta: VideoMeta,
    seed: int,
    objects_per_class: int = 3,
    speed: float = 0.6,
    size_fraction: tuple[float, float] = (0.08, 0.2),
    churn: float = 0.3,
    static: bool = False,
) -> list[GroundTruthFrame]:
    """Generate ground truth for a synthetic video piece.

    ``churn`` is the fraction of objects that enter or leave partway
    through the video. ``static`` freezes all motion and churn, producing a
    video whose perfect detections are temporally constant.
    """
    rng = np.random.default_rng(seed)
    m = meta.num_frames
    base = min(meta.width, meta.height)
    objects = []
    for cls in range(meta.num_classes):
        for _ in range(objects_per_class):
            bw = (size_fraction[0] + (size_fraction[1] - size_fraction[0]) * rng.random()) * base
            bh = (size_fraction[0] + (size_fraction[1] - size_fraction[0]) * rng.random()) * base
            angle = rng.random() * 2 * math.pi
            v = 0.0 if static else speed * (0.5 + rng.random())
            t_enter, t_exit = 0, m
            if not static and rng.random() < churn:
                if rng.random() < 0.5:
                    t_enter = int(rng.integers(m // 4, 3 * m // 4))
                else:
                    t_exit = int(rng.integers(m // 4, 3 * m // 4))
            objects.append(
                DriftingObject(
                    class_index=cls,
                    bw=bw,
                    bh=bh,
                    x0=bw / 2 + rng.random() * (meta.width - bw),
                    y0=bh / 2 + rng.random() * (meta.height - bh),
                    vx=v * math.cos(angle),
                    vy=v * math.sin(angle),
                    t_enter=t_enter,
                    t_exit=t_exit,
                )
            )
    frames = []
    for t in range(m):
        objs = []
        for o in objects:
            bbox = o.at(t, meta)
            if bbox is not None:
                objs.append(AnnotatedObject(bbox, o.class_index))
        frames.append(GroundTruthFrame(t, tuple(objs)))
    return frames
