"""Landmark and detection evaluation: normalized mean error, IoU, AP at 0.5.

Single class, greedy confidence-ordered matching, all-point interpolated
precision envelope for the average precision integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

Box = tuple[float, float, float, float]
Point = tuple[float, float]


@dataclass(frozen=True)
class LandmarkPrediction:
    points: tuple[Point, ...]
    crop_w: float
    crop_h: float

    def __post_init__(self):
        if self.crop_w <= 0 or self.crop_h <= 0:
            raise ValueError(f"crop must have positive area, got {self.crop_w}x{self.crop_h}")


@dataclass(frozen=True)
class Detection:
    box: Box
    confidence: float


def nme(pred: LandmarkPrediction, gt: Sequence[Point]) -> float:
    """Mean landmark error over sqrt(crop area), as a percentage.

    Scale-invariant: scaling coordinates and crop together leaves it fixed.
    """
    if len(pred.points) != len(gt) or not pred.points:
        raise ValueError(f"landmark counts differ: {len(pred.points)} vs {len(gt)}")
    norm = math.sqrt(pred.crop_w * pred.crop_h)
    total = 0.0
    for (px, py), (gx, gy) in zip(pred.points, gt):
        total += math.hypot(px - gx, py - gy) / norm
    return 100.0 * total / len(pred.points)


def dataset_nme(preds: Sequence[LandmarkPrediction], gts: Sequence[Sequence[Point]]) -> float:
    if len(preds) != len(gts) or not preds:
        raise ValueError("need equal, non-zero numbers of predictions and ground truths")
    return sum(nme(p, g) for p, g in zip(preds, gts)) / len(preds)


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two well-ordered boxes; 0 when disjoint."""
    ax1, ay1, ax2, ay2 = a
    bx1, by1, bx2, by2 = b
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def map50(detections_per_image: Sequence[Sequence[Detection]],
          gts_per_image: Sequence[Sequence[Box]],
          iou_threshold: float = 0.5) -> float:
    """Single-class average precision at the given IoU threshold.

    Detections are ranked by confidence across all images; each greedily
    claims the highest-IoU unmatched ground truth in its image. AP is the
    integral of the interpolated precision envelope over recall.
    """
    if len(detections_per_image) != len(gts_per_image):
        raise ValueError("detections and ground truths must cover the same images")
    n_gt = sum(len(g) for g in gts_per_image)
    ranked: list[tuple[float, int, int]] = []  # (confidence, image, index within image)
    for img, dets in enumerate(detections_per_image):
        for j, det in enumerate(dets):
            ranked.append((det.confidence, img, j))
    ranked.sort(key=lambda r: -r[0])
    if n_gt == 0 or not ranked:
        return 0.0

    matched: list[set[int]] = [set() for _ in gts_per_image]
    tps: list[bool] = []
    for conf, img, j in ranked:
        det = detections_per_image[img][j]
        best_iou, best_g = 0.0, -1
        for g, gt_box in enumerate(gts_per_image[img]):
            if g in matched[img]:
                continue
            v = iou(det.box, gt_box)
            if v >= iou_threshold and v > best_iou:
                best_iou, best_g = v, g
        if best_g >= 0:
            matched[img].add(best_g)
            tps.append(True)
        else:
            tps.append(False)

    precisions, recalls = [], []
    tp = fp = 0
    for is_tp in tps:
        tp += int(is_tp)
        fp += int(not is_tp)
        precisions.append(tp / (tp + fp))
        recalls.append(tp / n_gt)

    # All-point interpolation: running max of precision from the right.
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])
    ap = 0.0
    prev_r = 0.0
    for p, r in zip(precisions, recalls):
        if r > prev_r:
            ap += (r - prev_r) * p
            prev_r = r
    return ap
