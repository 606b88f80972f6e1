"""Pixel-level segmentation metrics.

Confusion counts and the derived accuracy/recall/precision/F1 scores, with
plume as the positive class. Degenerate 0/0 ratios are reported as None
(undefined) rather than 0 or 1, so batch averages can exclude them. Batch
aggregation is offered in both macro (average the per-image scores) and
micro (pool the confusion counts, then score) form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .pnm import PlumeMask


class DimensionMismatch(ValueError):
    """Predicted and ground-truth masks have different raster dimensions."""


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            tn=self.tn + other.tn,
        )


@dataclass(frozen=True)
class Scores:
    accuracy: Optional[float]
    recall: Optional[float]
    precision: Optional[float]
    f1: Optional[float]


def confusion(pred: PlumeMask, gt: PlumeMask) -> ConfusionMatrix:
    """Per-pixel confusion counts between a prediction and its ground truth."""
    if (pred.width_px, pred.height_px) != (gt.width_px, gt.height_px):
        raise DimensionMismatch(
            f"pred {pred.width_px}x{pred.height_px} vs gt {gt.width_px}x{gt.height_px}"
        )
    p = pred.pixels
    g = gt.pixels
    tp = int((p & g).sum())
    fp = int((p & ~g).sum())
    fn = int((~p & g).sum())
    tn = int((~p & ~g).sum())
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def f1_from(recall: Optional[float], precision: Optional[float]) -> Optional[float]:
    """Harmonic mean of recall and precision; None when undefined."""
    if recall is None or precision is None or recall + precision == 0:
        return None
    return 2.0 * recall * precision / (recall + precision)


def scores(cm: ConfusionMatrix) -> Scores:
    """Accuracy, recall, precision and F1 from confusion counts."""
    accuracy = (cm.tp + cm.tn) / cm.total if cm.total > 0 else None
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn > 0 else None
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp > 0 else None
    return Scores(
        accuracy=accuracy,
        recall=recall,
        precision=precision,
        f1=f1_from(recall, precision),
    )


def micro_scores(cms: Iterable[ConfusionMatrix]) -> Scores:
    """Scores of the pooled confusion counts."""
    pooled = ConfusionMatrix(0, 0, 0, 0)
    for cm in cms:
        pooled = pooled + cm
    return scores(pooled)


def macro_scores(cms: Iterable[ConfusionMatrix]) -> Scores:
    """Mean of the per-image scores, skipping undefined values per metric."""
    per_image = [scores(cm) for cm in cms]

    def mean_of(name: str) -> Optional[float]:
        values = [getattr(s, name) for s in per_image if getattr(s, name) is not None]
        return sum(values) / len(values) if values else None

    return Scores(
        accuracy=mean_of("accuracy"),
        recall=mean_of("recall"),
        precision=mean_of("precision"),
        f1=mean_of("f1"),
    )
