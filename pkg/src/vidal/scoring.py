"""Per-frame informativeness signals.

Three signals are computed per frame and per class from detection outputs:

* classification entropy, max-aggregated over the frame's instances;
* instance-count discontinuity against a piecewise-linear curve fitted
  through the annotated counts of the guiding frames;
* bounding-box discontinuity, one minus the mean IoU between the frame's
  binary occupancy grid and the grids of its temporal neighbors.

Everything here is a pure function of immutable inputs; per-frame and
per-class scoring can run fully in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from vidal.model import FrameDetections, VideoMeta
from vidal.util import round_half_up

# Binary occupancy grid, shape (height, width), True where at least one
# detected box of a single class covers the pixel.
LocalizationMatrix = np.ndarray


def instance_entropy(probs, normalize: bool = True) -> float:
    """Entropy of a class distribution in nats, with 0*log(0) = 0.

    When ``normalize`` is set the value is divided by log(k) so it lies in
    [0, 1] alongside the localization signals.
    """
    values = probs.probs if hasattr(probs, "probs") else tuple(probs)
    h = -math.fsum(p * math.log(p) for p in values if p > 0.0)
    if normalize:
        h /= math.log(len(values))
    # Guard against -0.0 and tiny negative rounding residue on one-hots.
    return max(0.0, h)


def classification_score(frame: FrameDetections, class_index: int, normalize: bool = True) -> float:
    """Maximum entropy over the detections assigned (argmax) to one class.

    A class with no assigned detections scores 0: absent detections carry no
    classification uncertainty; missed objects surface through the
    instance-count signal instead.
    """
    best = 0.0
    for det in frame.detections:
        if det.probs.argmax() == class_index:
            best = max(best, instance_entropy(det.probs, normalize=normalize))
    return best


@dataclass(frozen=True)
class InstanceCurve:
    """Per-class piecewise-linear instance-count estimate over frame index.

    Nodes are (guiding frame index, annotated count); the curve interpolates
    every node exactly and extrapolates as a constant beyond the outermost
    nodes.
    """

    node_frames: np.ndarray  # sorted, shape (n,)
    node_counts: np.ndarray  # shape (n, k)
    num_frames: int

    def value(self, frame_index: int) -> np.ndarray:
        """Estimated per-class counts at one frame, shape (k,)."""
        return self.table[frame_index]

    @property
    def table(self) -> np.ndarray:
        """Estimates for every frame, shape (m, k). Computed once, cached."""
        cached = getattr(self, "_table", None)
        if cached is None:
            xs = np.arange(self.num_frames)
            cached = np.column_stack(
                [
                    np.interp(xs, self.node_frames, self.node_counts[:, c])
                    for c in range(self.node_counts.shape[1])
                ]
            )
            object.__setattr__(self, "_table", cached)
        return cached


def fit_instance_curve(labeled: list[tuple[int, np.ndarray]], num_frames: int) -> InstanceCurve:
    """Fit the instance curve through (frame index, per-class counts) nodes.

    Raises ValueError on an empty node set; the curve is undefined without
    at least one annotated frame.
    """
    if not labeled:
        raise ValueError("cannot fit instance curve: no labeled frames")
    ordered = sorted(labeled, key=lambda item: item[0])
    frames = np.array([f for f, _ in ordered], dtype=np.int64)
    if len(np.unique(frames)) != len(frames):
        raise ValueError("duplicate labeled frame in instance curve nodes")
    counts = np.array([np.asarray(c, dtype=np.float64) for _, c in ordered])
    return InstanceCurve(frames, counts, num_frames)


def instance_discontinuity(n: int, n_est: float) -> float:
    """Capped relative deviation of a detected count from its estimate.

    min(1, |n - n_est| / n_est); a zero estimate means any detection at all
    is maximal discontinuity.
    """
    if n < 0 or n_est < 0:
        raise ValueError(f"counts must be non-negative, got n={n}, n_est={n_est}")
    if n_est == 0.0:
        return 0.0 if n == 0 else 1.0
    return min(1.0, abs(n - n_est) / n_est)


def rasterize_class(
    frame: FrameDetections, class_index: int, meta: VideoMeta
) -> LocalizationMatrix:
    """Binary occupancy grid of the pixels covered by one class's boxes.

    Pixel column px is covered iff px is in [x0, x1) with
    x0 = clamp(round(cx - bw/2)), x1 = clamp(round(cx + bw/2)); rows behave
    the same. Rounding is half-up; clamping is to [0, W] x [0, H], so a box
    fully outside the frame contributes nothing.
    """
    grid = np.zeros((meta.height, meta.width), dtype=bool)
    for det in frame.detections:
        if det.probs.argmax() != class_index:
            continue
        x_lo, y_lo, x_hi, y_hi = det.bbox.corners()
        x0 = min(max(round_half_up(x_lo), 0), meta.width)
        x1 = min(max(round_half_up(x_hi), 0), meta.width)
        y0 = min(max(round_half_up(y_lo), 0), meta.height)
        y1 = min(max(round_half_up(y_hi), 0), meta.height)
        grid[y0:y1, x0:x1] = True
    return grid


def matrix_iou(a: LocalizationMatrix, b: LocalizationMatrix) -> float:
    """Intersection-over-union of two binary grids of identical shape.

    Two all-zero grids compare as 1.0: no objects in either frame is perfect
    consistency, not maximal uncertainty.
    """
    if a.shape != b.shape:
        raise ValueError(f"matrix shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    inter = np.count_nonzero(a & b)
    return inter / union


def bbox_discontinuity(
    h_prev: LocalizationMatrix | None,
    h_cur: LocalizationMatrix,
    h_next: LocalizationMatrix | None,
) -> float:
    """One minus the mean IoU against the present temporal neighbors.

    Boundary frames use their single neighbor. Higher means the boxes moved
    or resized more between frames, i.e. more localization uncertainty.
    """
    ious = []
    for neighbor in (h_prev, h_next):
        if neighbor is not None:
            ious.append(matrix_iou(h_cur, neighbor))
    if not ious:
        raise ValueError("bbox discontinuity needs at least one neighbor frame")
    return 1.0 - math.fsum(ious) / len(ious)


@dataclass(frozen=True)
class FrameScoreBundle:
    """Per-frame, per-class signal values plus the aggregated scores.

    ``c``, ``dn`` and ``dh`` hold the raw signals, one entry per class, each
    in [0, 1]. ``s`` and ``frame_score`` are filled by the aggregation step
    (they depend on the strategy and its balance parameter) and are None
    until then; ``frame_score`` is the maximum per-class aggregated score.
    """

    frame_index: int
    c: np.ndarray
    dn: np.ndarray
    dh: np.ndarray
    s: np.ndarray | None = None
    frame_score: float | None = None


def score_frame(
    prev: FrameDetections | None,
    cur: FrameDetections,
    next_: FrameDetections | None,
    curve: InstanceCurve,
    meta: VideoMeta,
    normalize_entropy: bool = True,
    grid_cache: dict[int, list[LocalizationMatrix]] | None = None,
) -> FrameScoreBundle:
    """Compute the raw per-class signal triplet for one frame.

    Neighbor detections may come from the detector or, for labeled frames,
    from their ground truth. At least one neighbor must be present.
    ``grid_cache`` maps frame index to per-class grids so a frame scored
    once as a neighbor is not rasterized again.
    """
    if prev is None and next_ is None:
        raise ValueError(f"frame {cur.frame_index}: no neighbor detections available")
    k = meta.num_classes
    counts = _argmax_counts(cur, k)
    estimates = curve.value(cur.frame_index)

    c = np.zeros(k)
    dn = np.zeros(k)
    dh = np.zeros(k)
    prev_grids = _grids(prev, meta, grid_cache) if prev is not None else None
    next_grids = _grids(next_, meta, grid_cache) if next_ is not None else None
    cur_grids = _grids(cur, meta, grid_cache)
    for cls in range(k):
        c[cls] = classification_score(cur, cls, normalize=normalize_entropy)
        dn[cls] = instance_discontinuity(int(counts[cls]), float(estimates[cls]))
        dh[cls] = bbox_discontinuity(
            prev_grids[cls] if prev_grids is not None else None,
            cur_grids[cls],
            next_grids[cls] if next_grids is not None else None,
        )
    return FrameScoreBundle(cur.frame_index, c, dn, dh)


def _argmax_counts(frame: FrameDetections, k: int) -> np.ndarray:
    counts = np.zeros(k, dtype=np.int64)
    for det in frame.detections:
        counts[det.probs.argmax()] += 1
    return counts


def _grids(
    frame: FrameDetections,
    meta: VideoMeta,
    cache: dict[int, list[LocalizationMatrix]] | None = None,
) -> list[LocalizationMatrix]:
    if cache is not None and frame.frame_index in cache:
        return cache[frame.frame_index]
    grids = [rasterize_class(frame, cls, meta) for cls in range(meta.num_classes)]
    if cache is not None:
        cache[frame.frame_index] = grids
    return grids
