"""Box-level IoU matching and 11-point interpolated mAP.

Average precision per class follows the classic interpolated protocol: the
mean over 11 recall points of the maximum precision achieved at or beyond
that recall. mAP averages AP over classes and over a range of IoU matching
thresholds. Matching is greedy in descending confidence, each detection
taking the highest-IoU unmatched ground-truth box of its class.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from vidal.model import BBox, FrameDetections, GroundTruthFrame

RECALL_POINTS = tuple(r / 10 for r in range(11))


def _default_thresholds() -> tuple[float, ...]:
    return tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class EvalConfig:
    """IoU matching thresholds and interpolation recall points."""

    iou_thresholds: tuple[float, ...] = field(default_factory=_default_thresholds)
    recall_points: tuple[float, ...] = RECALL_POINTS

    def __post_init__(self) -> None:
        ts = tuple(self.iou_thresholds)
        if not ts or any(not 0.0 < t < 1.0 for t in ts):
            raise ValueError(f"IoU thresholds must lie in (0, 1): {ts}")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"IoU thresholds must be strictly increasing: {ts}")
        object.__setattr__(self, "iou_thresholds", ts)
        object.__setattr__(self, "recall_points", tuple(self.recall_points))


def box_iou(a: BBox, b: BBox) -> float:
    """Continuous-geometry IoU of two axis-aligned boxes; 0 when the union is empty."""
    ax0, ay0, ax1, ay1 = a.corners()
    bx0, by0, bx1, by1 = b.corners()
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    inter = max(0.0, iw) * max(0.0, ih)
    union = a.bw * a.bh + b.bw * b.bh - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def average_precision(
    flags: list[tuple[float, bool]], n_gt: int, config: EvalConfig | None = None
) -> float:
    """11-point interpolated AP from (confidence, is_true_positive) pairs.

    ``flags`` must already be sorted by descending confidence. With no
    ground truth, AP is 1 when there are also no detections (nothing to
    find, nothing claimed) and 0 otherwise.
    """
    config = config or EvalConfig()
    if n_gt == 0:
        return 1.0 if not flags else 0.0
    tp = 0
    precisions = []
    recalls = []
    for rank, (_, is_tp) in enumerate(flags, start=1):
        tp += int(is_tp)
        precisions.append(tp / rank)
        recalls.append(tp / n_gt)
    total = 0.0
    for point in config.recall_points:
        best = 0.0
        for precision, recall in zip(precisions, recalls):
            if recall >= point and precision > best:
                best = precision
        total += best
    return total / len(config.recall_points)


def match_frame(
    detections: FrameDetections,
    gt: GroundTruthFrame | None,
    class_index: int,
    iou_threshold: float,
) -> list[tuple[float, bool]]:
    """Greedy TP/FP flags for one frame and one class.

    Detections are taken in descending confidence; each claims the unmatched
    ground-truth box of the same class with the highest IoU at or above the
    threshold. No ground-truth box is ever matched twice.
    """
    dets = [
        (det.probs.max_prob(), pos, det.bbox)
        for pos, det in enumerate(detections.detections)
        if det.probs.argmax() == class_index
    ]
    dets.sort(key=lambda item: (-item[0], item[1]))
    gt_boxes = [o.bbox for o in gt.objects if o.class_index == class_index] if gt else []
    taken = [False] * len(gt_boxes)
    flags = []
    for conf, _, bbox in dets:
        best_iou = 0.0
        best_j = -1
        for j, gt_box in enumerate(gt_boxes):
            if taken[j]:
                continue
            iou = box_iou(bbox, gt_box)
            if iou >= iou_threshold and iou > best_iou:
                best_iou = iou
                best_j = j
        if best_j >= 0:
            taken[best_j] = True
            flags.append((conf, True))
        else:
            flags.append((conf, False))
    return flags


@dataclass(frozen=True)
class EvalReport:
    """mAP plus the per-class, per-threshold AP breakdown."""

    map: float
    per_class: dict[int, float]
    per_threshold: dict[float, float]
    table: dict[tuple[int, float], float]

    def to_document(self, class_names: tuple[str, ...] | None = None) -> dict:
        names = class_names or tuple(str(c) for c in sorted(self.per_class))
        return {
            "map": self.map,
            "per_class": {names[c]: ap for c, ap in sorted(self.per_class.items())},
            "per_threshold": {f"{t:.2f}": ap for t, ap in sorted(self.per_threshold.items())},
        }


def mean_ap(
    predictions: Mapping[int, FrameDetections],
    ground_truth: Mapping[int, GroundTruthFrame],
    num_classes: int,
    config: EvalConfig | None = None,
) -> EvalReport:
    """mAP over classes and IoU thresholds, with the full breakdown.

    Detections are pooled across frames per class; confidence for ranking is
    the maximum class probability. Frames present in only one of the two
    mappings still count (unmatched detections are false positives, and
    unpredicted ground truth hurts recall).
    """
    config = config or EvalConfig()
    if not ground_truth or all(not g.objects for g in ground_truth.values()):
        raise ValueError("cannot evaluate without any ground truth objects")
    table: dict[tuple[int, float], float] = {}
    frame_ids = sorted(set(predictions) | set(ground_truth))
    for cls in range(num_classes):
        n_gt = sum(
            sum(1 for o in g.objects if o.class_index == cls) for g in ground_truth.values()
        )
        for threshold in config.iou_thresholds:
            pooled: list[tuple[float, int, int, bool]] = []
            for f in frame_ids:
                preds = predictions.get(f)
                if preds is None:
                    continue
                for rank, (conf, is_tp) in enumerate(
                    match_frame(preds, ground_truth.get(f), cls, threshold)
                ):
                    pooled.append((conf, f, rank, is_tp))
            pooled.sort(key=lambda item: (-item[0], item[1], item[2]))
            flags = [(conf, is_tp) for conf, _, _, is_tp in pooled]
            table[(cls, threshold)] = average_precision(flags, n_gt, config)

    per_class = {
        cls: float(np.mean([table[(cls, t)] for t in config.iou_thresholds]))
        for cls in range(num_classes)
    }
    per_threshold = {
        t: float(np.mean([table[(cls, t)] for cls in range(num_classes)]))
        for t in config.iou_thresholds
    }
    overall = float(np.mean(list(table.values())))
    return EvalReport(overall, per_class, per_threshold, table)
