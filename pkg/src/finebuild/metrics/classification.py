"""Classification metrics with directly checkable definitions.

Confusion matrix rows are true classes, columns predicted classes. Mean
precision/recall/F1 are unweighted class averages (macro); a class with an
empty column or row yields 0 for the affected metric and is flagged.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import LengthMismatch, RankTooShort


def topk_accuracy(
    ranked_preds: Sequence[Sequence[int]],
    labels: Sequence[int],
    k: int,
    num_classes: int | None = None,
) -> float:
    """Fraction of samples whose true label appears in the first k ranks.

    Every list must carry at least min(k, K) entries, where K is
    ``num_classes`` (inferred from the data when omitted); a complete
    ranking therefore yields 1.0 for any k >= K.
    """
    if k < 1:
        raise RankTooShort(f"k must be >= 1, got {k}")
    if len(ranked_preds) != len(labels):
        raise LengthMismatch(
            f"{len(ranked_preds)} prediction lists vs {len(labels)} labels"
        )
    if num_classes is None:
        seen = set(labels)
        for ranks in ranked_preds:
            seen.update(ranks)
        num_classes = max(seen) + 1 if seen else 0
    needed = min(k, num_classes)
    hits = 0
    for ranks, label in zip(ranked_preds, labels):
        if len(ranks) < needed:
            raise RankTooShort(
                f"ranked list of length {len(ranks)} < required {needed}"
            )
        if label in list(ranks)[:k]:
            hits += 1
    return hits / len(labels) if labels else 0.0


def confusion(
    preds: Sequence[int], labels: Sequence[int], num_classes: int
) -> np.ndarray:
    """K x K integer counts; entry [true, predicted]."""
    if len(preds) != len(labels):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(labels)} labels")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    for p, t in zip(preds, labels):
        if not (0 <= p < num_classes and 0 <= t < num_classes):
            raise LengthMismatch(
                f"class index outside [0, {num_classes}): pred={p}, label={t}"
            )
        cm[t, p] += 1
    return cm


@dataclass(frozen=True)
class PerClassMetrics:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    zero_division_flags: np.ndarray  # bool per class

    @property
    def mean_precision(self) -> float:
        return float(self.precision.mean())

    @property
    def mean_recall(self) -> float:
        return float(self.recall.mean())

    @property
    def mean_f1(self) -> float:
        return float(self.f1.mean())


def precision_recall_f1(cm: np.ndarray) -> PerClassMetrics:
    """Per-class precision = diag/column sum, recall = diag/row sum,
    F1 = 2PR/(P+R); zero denominators give 0 and set the class flag."""
    cm = np.asarray(cm)
    k = cm.shape[0]
    precision = np.zeros(k)
    recall = np.zeros(k)
    f1 = np.zeros(k)
    flags = np.zeros(k, dtype=bool)
    for c in range(k):
        col = cm[:, c].sum()
        row = cm[c, :].sum()
        tp = cm[c, c]
        if col > 0:
            precision[c] = tp / col
        else:
            flags[c] = True
        if row > 0:
            recall[c] = tp / row
        else:
            flags[c] = True
        if precision[c] + recall[c] > 0:
            f1[c] = 2 * precision[c] * recall[c] / (precision[c] + recall[c])
        else:
            flags[c] = True
    return PerClassMetrics(precision, recall, f1, flags)


@dataclass(frozen=True)
class EvaluationReport:
    top1: float
    top5: float
    n1: int
    n5: int
    Nt: int
    per_class: PerClassMetrics
    confusion: np.ndarray
    class_names: tuple[str, ...]

    def save(self, out_dir: Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "metrics.csv").open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["metric", "value"])
            w.writerow(["top1", f"{self.top1:.12g}"])
            w.writerow(["top5", f"{self.top5:.12g}"])
            w.writerow(["mean_precision", f"{self.per_class.mean_precision:.12g}"])
            w.writerow(["mean_recall", f"{self.per_class.mean_recall:.12g}"])
            w.writerow(["mean_f1", f"{self.per_class.mean_f1:.12g}"])
            w.writerow(["n1", self.n1])
            w.writerow(["n5", self.n5])
            w.writerow(["Nt", self.Nt])
        with (out_dir / "confusion_matrix.csv").open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["class"] + list(self.class_names))
            for i, name in enumerate(self.class_names):
                w.writerow([name] + [int(v) for v in self.confusion[i]])
        with (out_dir / "per_class.csv").open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["class", "precision", "recall", "f1"])
            for i, name in enumerate(self.class_names):
                w.writerow(
                    [
                        name,
                        f"{self.per_class.precision[i]:.12g}",
                        f"{self.per_class.recall[i]:.12g}",
                        f"{self.per_class.f1[i]:.12g}",
                    ]
                )


def build_report(
    ranked_preds: Sequence[Sequence[int]],
    labels: Sequence[int],
    class_names: Sequence[str],
) -> EvaluationReport:
    """Assemble the full report from complete per-sample rankings."""
    k = len(class_names)
    nt = len(labels)
    top1 = topk_accuracy(ranked_preds, labels, 1)
    k5 = min(5, k)
    top5 = topk_accuracy(ranked_preds, labels, k5)
    preds = [ranks[0] for ranks in ranked_preds]
    cm = confusion(preds, labels, k)
    return EvaluationReport(
        top1=top1,
        top5=top5,
        n1=round(top1 * nt),
        n5=round(top5 * nt),
        Nt=nt,
        per_class=precision_recall_f1(cm),
        confusion=cm,
        class_names=tuple(class_names),
    )
