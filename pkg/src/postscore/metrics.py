"""Detection metrics (IoU, AP/mAP, sensitivity), landmark metrics (NME, FR),
and cross-fold aggregation.

NME normalizes the mean five-landmark Euclidean error by the ground-truth
glanular diameter |C-C'|, so it is invariant to uniform rescaling of both
prediction and ground truth.  The failure rate counts images whose NME
strictly exceeds the threshold (0.1 by default).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import (
    DegenerateNormalizer,
    EmptyGroundTruth,
    EmptyInput,
    WrongFrame,
)
from .geometry import BoundingBox, LandmarkSet

DEFAULT_IOU_THRESHOLD = 0.5
DEFAULT_CONFIDENCE_THRESHOLD = 0.25
DEFAULT_FAILURE_THRESHOLD = 0.1


@dataclass(frozen=True)
class DetectionRecord:
    """Predicted boxes (with confidences) and ground truth for one image."""

    image_id: str
    predictions: tuple[BoundingBox, ...]
    ground_truths: tuple[BoundingBox, ...]


@dataclass(frozen=True)
class NmeResult:
    """Per-fold landmark evaluation summary."""

    per_image_nme: tuple[float, ...]
    mean: float
    std: float
    failure_rate: float
    mse: float

    @classmethod
    def from_per_image(cls, nmes: Sequence[float], mse: float,
                       threshold: float = DEFAULT_FAILURE_THRESHOLD) -> "NmeResult":
        if not nmes:
            raise EmptyInput("cannot summarize an empty NME list")
        n = len(nmes)
        mean = sum(nmes) / n
        var = sum((v - mean) ** 2 for v in nmes) / n
        return cls(
            per_image_nme=tuple(float(v) for v in nmes),
            mean=float(mean),
            std=float(math.sqrt(var)),
            failure_rate=failure_rate(nmes, threshold),
            mse=float(mse),
        )


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over union area, in [0, 1]."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def _greedy_match(predictions: Sequence[BoundingBox],
                  ground_truths: Sequence[BoundingBox],
                  iou_threshold: float) -> list[bool]:
    """TP flag per prediction (given in descending-confidence order).

    Each prediction claims the highest-IoU still-unmatched ground truth,
    provided that IoU reaches the threshold.
    """
    matched = [False] * len(ground_truths)
    flags = []
    for pred in predictions:
        best_iou = 0.0
        best_j = -1
        for j, gt in enumerate(ground_truths):
            if matched[j]:
                continue
            v = iou(pred, gt)
            if v > best_iou:
                best_iou = v
                best_j = j
        if best_j >= 0 and best_iou >= iou_threshold:
            matched[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def average_precision(records: Sequence[DetectionRecord],
                      iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> float:
    """Area under the precision-recall curve for one class.

    Predictions are pooled across images, sorted by descending confidence,
    and greedily matched within their own image.  The PR curve is
    integrated as an exact step function through every point (no 11-point
    sampling, no precision envelope).
    """
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    n_gt = sum(len(r.ground_truths) for r in records)
    if n_gt == 0:
        raise EmptyGroundTruth("AP is undefined without ground-truth boxes")

    # (confidence, record index, box), confidence-descending; ties keep
    # record order then insertion order so matching is deterministic.
    pooled = [
        (p.confidence, ri, p)
        for ri, rec in enumerate(records)
        for p in rec.predictions
    ]
    pooled.sort(key=lambda t: -t[0])
    if not pooled:
        return 0.0

    per_record_preds: dict[int, list[BoundingBox]] = {}
    for _, ri, p in pooled:
        per_record_preds.setdefault(ri, []).append(p)
    per_record_flags = {
        ri: iter(_greedy_match(preds, records[ri].ground_truths, iou_threshold))
        for ri, preds in per_record_preds.items()
    }

    ap = 0.0
    tp = 0
    prev_recall = 0.0
    for rank, (_, ri, _) in enumerate(pooled, start=1):
        if next(per_record_flags[ri]):
            tp += 1
        recall = tp / n_gt
        precision = tp / rank
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def mean_average_precision(aps_per_class: Sequence[float]) -> float:
    """Mean of the per-class APs; with a single class this equals the AP."""
    if not aps_per_class:
        raise EmptyInput("need at least one per-class AP")
    return sum(aps_per_class) / len(aps_per_class)


def sensitivity(records: Sequence[DetectionRecord],
                iou_threshold: float = DEFAULT_IOU_THRESHOLD,
                confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD) -> float:
    """TP / (TP + FN) with matching restricted to confident predictions."""
    n_gt = sum(len(r.ground_truths) for r in records)
    if n_gt == 0:
        raise EmptyGroundTruth("sensitivity is undefined without ground-truth boxes")
    tp = 0
    for rec in records:
        keep = sorted(
            (p for p in rec.predictions if p.confidence >= confidence_threshold),
            key=lambda b: -b.confidence,
        )
        tp += sum(_greedy_match(keep, rec.ground_truths, iou_threshold))
    return tp / n_gt


def nme(pred: LandmarkSet, gt: LandmarkSet,
        eps: float = 1e-6) -> float:
    """Mean over the five landmarks of ||pred - gt|| / glanular diameter.

    The normalizer is the ground-truth |C - C'| distance.
    """
    if pred.frame != gt.frame:
        raise WrongFrame(
            f"prediction frame '{pred.frame}' differs from ground truth '{gt.frame}'"
        )
    d = gt.C.distance_to(gt.C_prime)
    if d < eps:
        raise DegenerateNormalizer(f"glanular diameter {d:.3g} below epsilon {eps:.3g}")
    total = sum(p.distance_to(g) for p, g in zip(pred.points(), gt.points()))
    return total / (5.0 * d)


def failure_rate(nmes: Sequence[float],
                 threshold: float = DEFAULT_FAILURE_THRESHOLD) -> float:
    """Fraction of per-image NMEs strictly greater than the threshold."""
    if not nmes:
        raise EmptyInput("failure rate over an empty list is undefined")
    return sum(1 for v in nmes if v > threshold) / len(nmes)


@dataclass(frozen=True)
class EvalReport:
    """Aggregated cross-fold evaluation, serializable with fixed key names."""

    nme_mean: float
    nme_std: float
    fr_at_0p1: float
    mse_mean: float
    mse_std: float
    map: float | None = None
    sensitivity: float | None = None
    config: dict = field(default_factory=dict)
    per_fold: tuple[dict, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "nme_mean": self.nme_mean,
            "nme_std": self.nme_std,
            "fr_at_0p1": self.fr_at_0p1,
            "mse_mean": self.mse_mean,
            "mse_std": self.mse_std,
            "map": self.map,
            "sensitivity": self.sensitivity,
            "config": self.config,
            "per_fold": list(self.per_fold),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n  # population std across folds
    return float(mean), float(math.sqrt(var))


def aggregate_folds(per_fold: Sequence[NmeResult],
                    maps: Sequence[float] = (),
                    sensitivities: Sequence[float] = (),
                    config: dict | None = None) -> EvalReport:
    """Summarize fold-level results into a single report row.

    NME and MSE are the mean and population standard deviation of the fold
    means; the failure rate and detection metrics are averaged over folds.
    """
    if not per_fold:
        raise EmptyInput("need at least one fold")
    nme_mean, nme_std = _mean_std([f.mean for f in per_fold])
    mse_mean, mse_std = _mean_std([f.mse for f in per_fold])
    fr = sum(f.failure_rate for f in per_fold) / len(per_fold)
    rows = tuple(
        {
            "fold": i,
            "nme_mean": f.mean,
            "nme_std": f.std,
            "fr_at_0p1": f.failure_rate,
            "mse": f.mse,
            "map": maps[i] if i < len(maps) else None,
            "sensitivity": sensitivities[i] if i < len(sensitivities) else None,
            "n_images": len(f.per_image_nme),
        }
        for i, f in enumerate(per_fold)
    )
    return EvalReport(
        nme_mean=nme_mean,
        nme_std=nme_std,
        fr_at_0p1=fr,
        mse_mean=mse_mean,
        mse_std=mse_std,
        map=sum(maps) / len(maps) if maps else None,
        sensitivity=sum(sensitivities) / len(sensitivities) if sensitivities else None,
        config=dict(config or {}),
        per_fold=rows,
    )
