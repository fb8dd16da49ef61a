"""Detector-agnostic active learning engine for video frame annotation.

Scores video frames by classification entropy and temporal localization
discontinuity on detection outputs, weights scores by distance to annotated
frames, and drives the query-annotate-train loop with pluggable detector
adapters, a synthetic detector for desk-scale runs, and an mAP evaluator.
"""

__version__ = "0.1.0"

from vidal.model import (
    AnnotatedObject,
    BBox,
    ClassDistribution,
    Detection,
    FrameDetections,
    GroundTruthFrame,
    VideoMeta,
)

__all__ = [
    "AnnotatedObject",
    "BBox",
    "ClassDistribution",
    "Detection",
    "FrameDetections",
    "GroundTruthFrame",
    "VideoMeta",
    "__version__",
]
