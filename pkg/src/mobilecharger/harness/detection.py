"""Average precision, precision and recall for a bounding-box detector.

Boxes are ``(x1, y1, x2, y2)``. Predictions and ground truths may carry an
image id so that a whole test set can be scored at once; matching never
crosses images.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Prediction:
    bbox: tuple[float, float, float, float]
    confidence: float
    image: int | str = 0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")


@dataclass(frozen=True)
class GroundTruth:
    bbox: tuple[float, float, float, float]
    image: int | str = 0


@dataclass
class DetectionEval:
    predictions: list = field(default_factory=list)
    ground_truth: list = field(default_factory=list)
    iou_threshold: float = 0.5

    def __post_init__(self):
        self.predictions = [_as_prediction(p) for p in self.predictions]
        self.ground_truth = [_as_truth(g) for g in self.ground_truth]

    @classmethod
    def from_json(cls, doc: dict) -> DetectionEval:
        preds = [Prediction(tuple(p["bbox"]), p["confidence"], p.get("image", 0))
                 for p in doc.get("predictions", [])]
        gts = [GroundTruth(tuple(g["bbox"]), g.get("image", 0)) if isinstance(g, dict)
               else GroundTruth(tuple(g)) for g in doc.get("ground_truth", [])]
        return cls(preds, gts, doc.get("iou_threshold", 0.5))


def _as_prediction(p) -> Prediction:
    if isinstance(p, Prediction):
        return p
    return Prediction(tuple(p[0]), p[1], *p[2:])


def _as_truth(g) -> GroundTruth:
    """Accepts a GroundTruth, a bare box, or ``(box, image)``."""
    if isinstance(g, GroundTruth):
        return g
    if len(g) == 4 and np.isscalar(g[0]):
        return GroundTruth(tuple(g))
    return GroundTruth(tuple(g[0]), *g[1:])


def iou(a, b) -> float:
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    area_a = max(0.0, a[2] - a[0]) * max(0.0, a[3] - a[1])
    area_b = max(0.0, b[2] - b[0]) * max(0.0, b[3] - b[1])
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


def match(e: DetectionEval) -> list[bool]:
    """TP flags in descending-confidence order.

    Each prediction is paired with its highest-IoU ground truth in the same
    image; it is a true positive if that IoU clears the threshold and the
    ground truth has not already been claimed.
    """
    order = sorted(range(len(e.predictions)), key=lambda i: -e.predictions[i].confidence)
    claimed = set()
    flags = []
    for i in order:
        p = e.predictions[i]
        best, best_j = -1.0, None
        for j, g in enumerate(e.ground_truth):
            if g.image != p.image:
                continue
            v = iou(p.bbox, g.bbox)
            if v > best:
                best, best_j = v, j
        if best_j is not None and best >= e.iou_threshold and best_j not in claimed:
            claimed.add(best_j)
            flags.append(True)
        else:
            flags.append(False)
    return flags


def pr_curve(e: DetectionEval) -> tuple[np.ndarray, np.ndarray]:
    flags = np.array(match(e), dtype=bool)
    tp = np.cumsum(flags)
    ranks = np.arange(1, len(flags) + 1)
    n_gt = len(e.ground_truth)
    recall = tp / n_gt if n_gt else np.zeros(len(flags))
    precision = tp / ranks if len(flags) else np.zeros(0)
    return precision, recall


def average_precision(precision, recall) -> float:
    """All-points interpolated area under the precision-recall curve."""
    if len(precision) == 0:
        return 0.0
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    steps = np.flatnonzero(mrec[1:] != mrec[:-1]) + 1
    return float(np.sum((mrec[steps] - mrec[steps - 1]) * mpre[steps]))


def detection_metrics(e: DetectionEval) -> tuple[float, float, float]:
    """(AP, precision, recall) with precision/recall taken after all predictions.

    No predictions gives precision 0; no ground truth gives recall 0.
    """
    precision, recall = pr_curve(e)
    if len(e.ground_truth) == 0:
        return 0.0, 0.0, 0.0
    ap = average_precision(precision, recall)
    p = float(precision[-1]) if len(precision) else 0.0
    r = float(recall[-1]) if len(recall) else 0.0
    return ap, p, r
