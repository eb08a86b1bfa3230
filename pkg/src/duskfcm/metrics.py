"""Overlap and classification metrics for predicted vs. reference masks.

Sensitivity and specificity use the standard denominators TP+FN and TN+FP.
The per-metric functions raise on undefined inputs; :func:`full_report`
never raises for them and instead records a flag next to a conventional
value (1.0 for empty-vs-empty overlap, 0.0 otherwise).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    BothMasksEmpty,
    DimensionMismatch,
    NoNegatives,
    NoPositives,
    NoPredictedPositives,
    UndefinedF1,
)

METRIC_NAMES = (
    "sa", "sensitivity", "precision", "f1", "mcc", "dice", "jaccard", "specificity", "iou",
)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    sa: float
    sensitivity: float
    precision: float
    f1: float
    mcc: float
    dice: float
    jaccard: float
    specificity: float
    iou: float
    flags: tuple = field(default=())

    def as_dict(self):
        out = asdict(self)
        out["flags"] = list(self.flags)
        return out

    def values(self):
        return tuple(getattr(self, n) for n in METRIC_NAMES)


def _check(pred, gt):
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"prediction {pred.shape} vs ground truth {gt.shape}")
    return pred, gt


def confusion(pred, gt) -> ConfusionCounts:
    pred, gt = _check(pred, gt)
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    return ConfusionCounts(tp, fp, fn, pred.size - tp - fp - fn)


def segmentation_accuracy(pred_labels, gt_labels) -> float:
    """Fraction of pixels whose predicted label equals the reference label.

    Both arguments are label images describing the partitions S_i and G_i.
    """
    pred_labels = np.asarray(pred_labels)
    gt_labels = np.asarray(gt_labels)
    if pred_labels.shape != gt_labels.shape:
        raise DimensionMismatch(f"{pred_labels.shape} vs {gt_labels.shape}")
    labels = np.union1d(np.unique(pred_labels), np.unique(gt_labels))
    agree = sum(int(np.count_nonzero((pred_labels == k) & (gt_labels == k))) for k in labels)
    return agree / pred_labels.size


def sensitivity(c: ConfusionCounts) -> float:
    if c.tp + c.fn == 0:
        raise NoPositives("sensitivity is undefined without reference positives")
    return c.tp / (c.tp + c.fn)


def precision(c: ConfusionCounts) -> float:
    if c.tp + c.fp == 0:
        raise NoPredictedPositives("precision is undefined without predicted positives")
    return c.tp / (c.tp + c.fp)


def specificity(c: ConfusionCounts) -> float:
    if c.tn + c.fp == 0:
        raise NoNegatives("specificity is undefined without reference negatives")
    return c.tn / (c.tn + c.fp)


def f1(c: ConfusionCounts) -> float:
    p = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    r = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    if p + r == 0:
        raise UndefinedF1("precision and recall are both zero")
    return 2 * p * r / (p + r)


def mcc(c: ConfusionCounts) -> float:
    factors = (c.tp + c.fn, c.tp + c.fp, c.tn + c.fp, c.tn + c.fn)
    if 0 in factors:
        return 0.0
    # integer numerator and radicand keep the value exact up to the final sqrt
    num = c.tp * c.tn - c.fp * c.fn
    return num / math.sqrt(math.prod(factors))


def dice(c: ConfusionCounts) -> float:
    den = 2 * c.tp + c.fp + c.fn
    if den == 0:
        raise BothMasksEmpty("dice is undefined for two empty masks")
    return 2 * c.tp / den


def jaccard(c: ConfusionCounts) -> float:
    den = c.tp + c.fp + c.fn
    if den == 0:
        raise BothMasksEmpty("jaccard is undefined for two empty masks")
    return c.tp / den


def iou(pred, gt) -> float:
    pred, gt = _check(pred, gt)
    inter = int(np.count_nonzero(pred & gt))
    union = int(np.count_nonzero(pred | gt))
    if union == 0:
        raise BothMasksEmpty("IoU is undefined for two empty masks")
    return inter / union


def report_from_counts(c: ConfusionCounts) -> MetricsReport:
    flags = []

    def guarded(fn, name, fallback):
        try:
            return fn(c)
        except (NoPositives, NoPredictedPositives, NoNegatives, BothMasksEmpty):
            flags.append(f"{name}_undefined")
            return fallback

    both_empty = c.tp + c.fp + c.fn == 0
    sens = guarded(sensitivity, "sensitivity", 0.0)
    prec = guarded(precision, "precision", 0.0)
    spec = guarded(specificity, "specificity", 0.0)
    dsc = guarded(dice, "dice", 1.0)
    jac = guarded(jaccard, "jaccard", 1.0)
    if both_empty:
        flags.append("undefined_convention")
    # F1 = Dice for binary masks; computing it as such keeps the identity exact
    f1_value = dsc
    if c.tp == 0 and not both_empty:
        flags.append("f1_undefined")
    return MetricsReport(
        sa=(c.tp + c.tn) / c.total,
        sensitivity=sens,
        precision=prec,
        f1=f1_value,
        mcc=mcc(c),
        dice=dsc,
        jaccard=jac,
        specificity=spec,
        iou=jac,
        flags=tuple(flags),
    )


def full_report(pred, gt) -> MetricsReport:
    """All nine metrics from one confusion pass."""
    return report_from_counts(confusion(pred, gt))


def mean_report(reports) -> dict:
    reports = list(reports)
    if not reports:
        return {}
    return {n: float(np.mean([getattr(r, n) for r in reports])) for n in METRIC_NAMES}
