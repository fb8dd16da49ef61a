"""Canonical data types for video metadata, detections, and annotations.

Boxes are stored center-based (cx, cy, width, height) in pixels. A detection's
class is the argmax of its distribution, ties resolving to the lowest index.
All types are immutable values; safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ValidationError(ValueError):
    """Raised when a value violates a model invariant."""


@dataclass(frozen=True)
class VideoMeta:
    """Static properties of one video piece.

    Attributes:
        width: Frame width in pixels.
        height: Frame height in pixels.
        num_frames: Number of frames in the video piece.
        class_names: Ordered class labels; defines the class index space.
    """

    width: int
    height: int
    num_frames: int
    class_names: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValidationError(f"frame size must be >= 1x1, got {self.width}x{self.height}")
        if self.num_frames < 2:
            raise ValidationError(f"need at least 2 frames, got {self.num_frames}")
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if len(self.class_names) < 2:
            raise ValidationError("need at least 2 classes for entropy to be meaningful")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: center coordinates plus width/height, in pixels.

    Boxes may partially or fully exceed frame bounds; rasterization clamps.
    """

    cx: float
    cy: float
    bw: float
    bh: float

    def __post_init__(self) -> None:
        for name in ("cx", "cy", "bw", "bh"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValidationError(f"bbox field {name} must be finite, got {v!r}")
        if self.bw < 0 or self.bh < 0:
            raise ValidationError(f"bbox size must be non-negative, got {self.bw}x{self.bh}")

    def corners(self) -> tuple[float, float, float, float]:
        """Return (x0, y0, x1, y1) corner coordinates."""
        return (
            self.cx - self.bw / 2,
            self.cy - self.bh / 2,
            self.cx + self.bw / 2,
            self.cy + self.bh / 2,
        )


# |sum(probs) - 1| above this is rejected rather than silently renormalized.
_PROB_SUM_TOL = 1e-6


@dataclass(frozen=True)
class ClassDistribution:
    """Normalized probability vector over the k classes."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probs)
        if len(probs) < 1:
            raise ValidationError("class distribution must have at least one entry")
        for p in probs:
            if not math.isfinite(p) or p < 0 or p > 1 + _PROB_SUM_TOL:
                raise ValidationError(f"probability out of range: {p!r}")
        total = math.fsum(probs)
        if abs(total - 1.0) > _PROB_SUM_TOL:
            raise ValidationError(f"probabilities sum to {total}, expected 1 within {_PROB_SUM_TOL}")
        object.__setattr__(self, "probs", tuple(p / total for p in probs))

    def __len__(self) -> int:
        return len(self.probs)

    def argmax(self) -> int:
        """Most likely class; ties resolve to the lowest index."""
        return max(range(len(self.probs)), key=lambda i: (self.probs[i], -i))

    def max_prob(self) -> float:
        return max(self.probs)


@dataclass(frozen=True)
class Detection:
    """One detected instance: a box plus its class distribution."""

    bbox: BBox
    probs: ClassDistribution


@dataclass(frozen=True)
class FrameDetections:
    """All detections of one frame. The list may be empty."""

    frame_index: int
    detections: tuple[Detection, ...]

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValidationError(f"frame index must be >= 0, got {self.frame_index}")
        object.__setattr__(self, "detections", tuple(self.detections))

    def __len__(self) -> int:
        return len(self.detections)


@dataclass(frozen=True)
class AnnotatedObject:
    """One ground-truth object: a box and its class index."""

    bbox: BBox
    class_index: int

    def __post_init__(self) -> None:
        if self.class_index < 0:
            raise ValidationError(f"class index must be >= 0, got {self.class_index}")


@dataclass(frozen=True)
class GroundTruthFrame:
    """Human annotation of one frame."""

    frame_index: int
    objects: tuple[AnnotatedObject, ...]

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValidationError(f"frame index must be >= 0, got {self.frame_index}")
        object.__setattr__(self, "objects", tuple(self.objects))

    def validate_classes(self, num_classes: int) -> None:
        for obj in self.objects:
            if obj.class_index >= num_classes:
                raise ValidationError(
                    f"frame {self.frame_index}: class index {obj.class_index} "
                    f"out of range for {num_classes} classes"
                )


def filter_detections(frame: FrameDetections, threshold: float) -> FrameDetections:
    """Keep only detections whose maximum class probability reaches threshold.

    Idempotent; order preserved; an empty result is valid.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError(f"confidence threshold must be in [0, 1], got {threshold}")
    kept = tuple(d for d in frame.detections if d.probs.max_prob() >= threshold)
    return FrameDetections(frame.frame_index, kept)


def class_counts(frame: FrameDetections, num_classes: int) -> np.ndarray:
    """Count detections per argmax class. Returns an int vector of length k."""
    counts = np.zeros(num_classes, dtype=np.int64)
    for det in frame.detections:
        counts[det.probs.argmax()] += 1
    return counts


def gt_class_counts(gt: GroundTruthFrame, num_classes: int) -> np.ndarray:
    """Count annotated objects per class. Returns an int vector of length k."""
    counts = np.zeros(num_classes, dtype=np.int64)
    for obj in gt.objects:
        counts[obj.class_index] += 1
    return counts


def gt_as_detections(gt: GroundTruthFrame, num_classes: int) -> FrameDetections:
    """Turn an annotation into detections with one-hot class distributions.

    Labeled frames contribute their ground truth this way when they serve as
    temporal neighbors: certain labels carry zero classification entropy.
    """
    dets = []
    for obj in gt.objects:
        probs = [0.0] * num_classes
        probs[obj.class_index] = 1.0
        dets.append(Detection(obj.bbox, ClassDistribution(tuple(probs))))
    return FrameDetections(gt.frame_index, tuple(dets))
