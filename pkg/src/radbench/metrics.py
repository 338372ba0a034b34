"""Classification metric primitives.

Undefined values are ``None`` and are always accompanied by a flag explaining
why (``SingleClass`` for an empty positive or negative class, ``EmptyInput``
for a cell with no cases). Counts are exact int64; rates are float64.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import AllUndefined, EmptyInput, LengthMismatch, SingleClass, UnknownLabel


class Flag(str, enum.Enum):
    DegenerateScores = "DegenerateScores"
    SingleClass = "SingleClass"
    BelowMinN = "BelowMinN"
    EmptyInput = "EmptyInput"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true labels, columns are predicted labels."""

    labels: tuple[str, ...]
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLabel(f"label {label!r} not in vocabulary") from None

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ConfusionMatrix)
            and self.labels == other.labels
            and np.array_equal(self.counts, other.counts)
        )

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "counts": self.counts.tolist()}


@dataclass(frozen=True, eq=False)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    # one threshold per point after the leading (0, 0)
    thresholds: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def to_dict(self) -> dict:
        return {"points": [list(p) for p in self.points], "thresholds": self.thresholds.tolist()}


def _label_index(values: Sequence[str], vocabulary: Sequence[str]) -> np.ndarray:
    lookup = {label: i for i, label in enumerate(vocabulary)}
    try:
        return np.fromiter((lookup[v] for v in values), dtype=np.int64, count=len(values))
    except KeyError as exc:
        raise UnknownLabel(f"label {exc.args[0]!r} not in vocabulary") from None


def confusion(truths: Sequence[str], predictions: Sequence[str], vocabulary: Sequence[str]) -> ConfusionMatrix:
    if len(truths) != len(predictions):
        raise LengthMismatch(f"{len(truths)} truths vs {len(predictions)} predictions")
    t = _label_index(truths, vocabulary)
    p = _label_index(predictions, vocabulary)
    counts = _kernels.confusion_counts(t, p, len(vocabulary))
    return ConfusionMatrix(tuple(vocabulary), np.asarray(counts, dtype=np.int64))


def accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total == 0:
        raise EmptyInput("accuracy of an empty confusion matrix")
    return float(np.trace(cm.counts)) / total


def sensitivity_specificity(cm: ConfusionMatrix, label: str) -> tuple[Optional[float], Optional[float]]:
    """One-vs-rest (TP/(TP+FN), TN/(TN+FP)); ``None`` where a denominator is zero."""
    i = cm.index(label)
    c = cm.counts
    tp = int(c[i, i])
    fn = int(c[i, :].sum()) - tp
    fp = int(c[:, i].sum()) - tp
    tn = cm.total - tp - fn - fp
    sens = tp / (tp + fn) if tp + fn else None
    spec = tn / (tn + fp) if tn + fp else None
    return sens, spec


def roc_points(scores, truths) -> RocCurve:
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    truths = np.ascontiguousarray(truths, dtype=np.bool_)
    if scores.shape != truths.shape:
        raise LengthMismatch(f"{scores.size} scores vs {truths.size} truths")
    n_pos = int(truths.sum())
    n_neg = truths.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass(f"{n_pos} positives / {n_neg} negatives")
    fps, tps, thresholds = _kernels.roc_counts(scores, truths)
    fpr = np.r_[0.0, np.asarray(fps, dtype=np.float64) / n_neg]
    tpr = np.r_[0.0, np.asarray(tps, dtype=np.float64) / n_pos]
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=np.asarray(thresholds, dtype=np.float64))


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under an ROC curve."""
    return _kernels.trapezoid(curve.fpr, curve.tpr)


def binary_auc(scores, truths) -> Optional[float]:
    """AUC, or ``None`` when one class is absent."""
    try:
        return auc(roc_points(scores, truths))
    except SingleClass:
        return None


def macro_ovr_auc(
    per_label_scores: Mapping[str, Sequence[float]],
    truths: Sequence[str],
    vocabulary: Sequence[str],
) -> tuple[dict[str, Optional[float]], float]:
    """Per-label one-vs-rest AUCs and their unweighted mean over defined labels.

    Labels lacking positives or negatives map to ``None`` and are left out of
    the mean. Raises ``AllUndefined`` when nothing is left.
    """
    t = _label_index(truths, vocabulary)
    per_label: dict[str, Optional[float]] = {}
    for i, label in enumerate(vocabulary):
        if label not in per_label_scores:
            raise UnknownLabel(f"no scores for label {label!r}")
        per_label[label] = binary_auc(per_label_scores[label], t == i)
    defined = [v for v in per_label.values() if v is not None]
    if not defined:
        raise AllUndefined("no label has a defined AUC")
    return per_label, float(np.mean(defined))


@dataclass(frozen=True)
class LabelMetrics:
    auc: Optional[float]
    sensitivity: Optional[float] = None
    specificity: Optional[float] = None
    flags: frozenset = frozenset()

    def to_dict(self, full: bool = True) -> dict:
        out = {"auc": self.auc, "flags": sorted(str(f) for f in self.flags)}
        if full:
            out["sensitivity"] = self.sensitivity
            out["specificity"] = self.specificity
        return out


@dataclass(frozen=True)
class MetricReport:
    n: int
    per_label: dict[str, LabelMetrics]
    macro_auc: Optional[float]
    accuracy: Optional[float] = None
    flags: frozenset = frozenset()
    full: bool = True

    def with_flags(self, *extra: Flag) -> "MetricReport":
        return MetricReport(
            n=self.n,
            per_label=self.per_label,
            macro_auc=self.macro_auc,
            accuracy=self.accuracy,
            flags=self.flags | frozenset(extra),
            full=self.full,
        )

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "macro_auc": self.macro_auc,
            "flags": sorted(str(f) for f in self.flags),
            "per_label": {k: v.to_dict(self.full) for k, v in self.per_label.items()},
        }
        if self.full:
            out["accuracy"] = self.accuracy
        return out


def metric_report(
    truths: Sequence[str],
    predictions: Sequence[str],
    per_label_scores: Mapping[str, Sequence[float]],
    vocabulary: Sequence[str],
    *,
    degenerate: bool = False,
    full: bool = True,
) -> MetricReport:
    """Compute a MetricReport over one set of cases.

    ``full=False`` computes AUC only (used for intersection cells).
    Never raises for degenerate data; undefined values get flags instead.
    """
    n = len(truths)
    flags: set[Flag] = set()
    if degenerate:
        flags.add(Flag.DegenerateScores)
    if n == 0:
        flags.add(Flag.EmptyInput)
        empty = {lab: LabelMetrics(auc=None, flags=frozenset({Flag.EmptyInput})) for lab in vocabulary}
        return MetricReport(n=0, per_label=empty, macro_auc=None, accuracy=None, flags=frozenset(flags), full=full)

    t = _label_index(truths, vocabulary)
    cm = confusion(truths, predictions, vocabulary) if full else None
    per_label: dict[str, LabelMetrics] = {}
    for i, label in enumerate(vocabulary):
        value = binary_auc(per_label_scores[label], t == i)
        lflags = set()
        if value is None:
            lflags.add(Flag.SingleClass)
        sens = spec = None
        if cm is not None:
            sens, spec = sensitivity_specificity(cm, label)
            if sens is None or spec is None:
                lflags.add(Flag.SingleClass)
        per_label[label] = LabelMetrics(auc=value, sensitivity=sens, specificity=spec, flags=frozenset(lflags))

    defined = [m.auc for m in per_label.values() if m.auc is not None]
    macro = float(np.mean(defined)) if defined else None
    if any(m.flags for m in per_label.values()):
        flags.add(Flag.SingleClass)
    acc = accuracy(cm) if cm is not None else None
    return MetricReport(n=n, per_label=per_label, macro_auc=macro, accuracy=acc, flags=frozenset(flags), full=full)
