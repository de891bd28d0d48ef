"""Classification metrics and the information-transfer-rate calculator.

ITR for an M-class selection task with accuracy P and selection time T
seconds, in bits per minute:

    itr = 60 * (log2 M + P log2 P + (1-P) log2((1-P)/(M-1))) / T

with P log2 P -> 0 as P -> 1. Below-chance accuracies give a negative
bit rate, which is clamped to 0 and flagged, following BCI reporting
convention.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "ConfusionMatrix",
    "MetricsReport",
    "ItrPoint",
    "confusion",
    "metrics",
    "itr",
    "itr_point",
    "itr_curve_from_accuracies",
    "itr_curve",
]


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[t][p] = number of epochs of true class t predicted as p."""

    counts: np.ndarray
    class_names: tuple

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ParameterError(f"counts must be square, got {counts.shape}")
        if np.any(counts < 0):
            raise ParameterError("confusion counts must be non-negative")
        names = tuple(self.class_names)
        if len(names) != counts.shape[0]:
            raise ParameterError(f"{len(names)} names for a {counts.shape[0]}-class matrix")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "class_names", names)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(preds, truths, class_names=None) -> ConfusionMatrix:
    """Build a confusion matrix from parallel prediction/truth id lists."""
    preds = np.asarray(preds, dtype=np.int64).ravel()
    truths = np.asarray(truths, dtype=np.int64).ravel()
    if preds.size != truths.size:
        raise ParameterError(f"{preds.size} predictions for {truths.size} truths")
    if class_names is None:
        k = int(max(preds.max(initial=-1), truths.max(initial=-1))) + 1
        k = max(k, 1)
        class_names = tuple(str(i) for i in range(k))
    k = len(class_names)
    if preds.size and (preds.min() < 0 or preds.max() >= k or truths.min() < 0 or truths.max() >= k):
        raise ParameterError(f"class ids must be in [0, {k - 1}]")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (truths, preds), 1)
    return ConfusionMatrix(counts=counts, class_names=tuple(class_names))


@dataclass(frozen=True)
class MetricsReport:
    """Percentages; None marks an undefined ratio (zero denominator)."""

    accuracy: float | None
    sensitivity: float | None = None
    specificity: float | None = None


def metrics(cm: ConfusionMatrix, positive_class: int | None = None) -> MetricsReport:
    """Accuracy, plus sensitivity/specificity for binary matrices.

    Sensitivity and specificity require a 2-class matrix and a designated
    positive class id.
    """
    total = cm.total
    accuracy = 100.0 * np.trace(cm.counts) / total if total else None
    sens = spec = None
    if positive_class is not None:
        if cm.counts.shape[0] != 2:
            raise ParameterError("sensitivity/specificity need a 2-class matrix")
        if positive_class not in (0, 1):
            raise ParameterError(f"positive_class must be 0 or 1, got {positive_class}")
        p = positive_class
        n = 1 - p
        tp, fn = cm.counts[p, p], cm.counts[p, n]
        tn, fp = cm.counts[n, n], cm.counts[n, p]
        sens = 100.0 * tp / (tp + fn) if tp + fn else None
        spec = 100.0 * tn / (tn + fp) if tn + fp else None
    return MetricsReport(accuracy=accuracy, sensitivity=sens, specificity=spec)


@dataclass(frozen=True)
class ItrPoint:
    """One point of an accuracy/bit-rate trade-off sweep."""

    window_s: float
    accuracy: float
    num_classes: int
    itr_bit_per_min: float
    clamped: bool = False


def itr(p: float, m: int, t: float) -> float:
    """Information transfer rate in bit/min (clamped to 0 below chance)."""
    return itr_point(p, m, t).itr_bit_per_min


def itr_point(p: float, m: int, t: float) -> ItrPoint:
    if not 0 < p <= 1:
        raise ParameterError(f"accuracy must be in (0, 1], got {p}")
    if m < 2:
        raise ParameterError(f"need at least 2 classes, got {m}")
    if t <= 0:
        raise ParameterError(f"window length must be positive, got {t}")
    bits = np.log2(m)
    if p < 1.0:
        bits += p * np.log2(p) + (1.0 - p) * np.log2((1.0 - p) / (m - 1))
    # below chance the formula turns positive again near P=0; by reporting
    # convention anything under 1/M carries no usable rate
    clamped = p < 1.0 / m
    rate = 0.0 if clamped else max(60.0 * float(bits) / t, 0.0)
    return ItrPoint(window_s=t, accuracy=p, num_classes=m, itr_bit_per_min=rate, clamped=bool(clamped))


def itr_curve_from_accuracies(accuracies, fractions, full_window_s: float, num_classes: int) -> list:
    """ItrPoints for externally measured accuracies at window fractions."""
    accuracies = list(accuracies)
    fractions = list(fractions)
    if len(accuracies) != len(fractions):
        raise ParameterError(f"{len(accuracies)} accuracies for {len(fractions)} fractions")
    return [itr_point(p, num_classes, f * full_window_s) for p, f in zip(accuracies, fractions)]


def itr_curve(
    x: np.ndarray,
    y: np.ndarray,
    fractions,
    full_window_s: float,
    config=None,
    k: int = 5,
    pool_height: int = 1,
) -> list:
    """Accuracy and bit rate versus window fraction.

    Because the network's time dimension is baked into its shape, each
    fraction retrains from scratch on truncated windows (k-fold mean
    accuracy) rather than zero-padding into a fixed-size model.
    """
    from .training import TrainConfig, kfold_cv  # deferred: avoids an import cycle

    if config is None:
        config = TrainConfig()
    x = np.asarray(x)
    out = []
    num_classes = int(np.asarray(y).max()) + 1
    for f in fractions:
        if not 0 < f <= 1:
            raise ParameterError(f"fractions must be in (0, 1], got {f}")
        keep = int(round(f * x.shape[2]))
        report = kfold_cv(x[:, :, :keep], y, k=k, config=config, pool_height=pool_height)
        p = report.mean_accuracy / 100.0
        out.append(itr_point(max(p, 1e-12), num_classes, f * full_window_s))
    return out
