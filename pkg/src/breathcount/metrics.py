"""Counting evaluation: per-class precision/recall/F1, weighted averages,
and counting errors.

The weighted averages use class weight 1/c for group size c, so mistakes
in small groups cost more. The weighted F1 is the harmonic mean of the
weighted precision and weighted recall (not the weighted mean of
per-class F1 values; the two differ).

Predictions outside the class set land in a single OOD bucket: they are
false positives for no in-set class and false negatives for the true one.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

DEFAULT_CLASSES = (2, 3, 5, 7)
OOD = "OOD"


class MetricsError(ValueError):
    pass


def regression_to_class(value: float, class_set=DEFAULT_CLASSES):
    """Round to the nearest integer; values outside the class set become OOD."""
    if not np.isfinite(value):
        raise MetricsError(f"prediction {value} is not finite")
    rounded = int(round(value))
    return rounded if rounded in class_set else OOD


def counting_errors(pred: list, truth: list) -> dict:
    """MAE and MSE of raw integer counts."""
    if len(pred) != len(truth) or len(pred) == 0:
        raise MetricsError(
            f"prediction/truth lengths differ or empty ({len(pred)} vs {len(truth)})"
        )
    diff = np.asarray(pred, dtype=float) - np.asarray(truth, dtype=float)
    return {"mae": float(np.abs(diff).mean()), "mse": float((diff**2).mean())}


def weighted_metrics(per_class: dict, weights: dict | None = None) -> dict:
    """Weighted precision/recall/F1 from per-class (precision, recall).

    weights default to 1/c for each class label c. F1 is defined as 0 when
    either weighted precision or recall is 0.
    """
    if not per_class:
        raise MetricsError("per_class mapping is empty")
    if weights is None:
        weights = {c: 1.0 / c for c in per_class}
    if any(w <= 0 for w in weights.values()):
        raise MetricsError("weights must be positive")
    total = sum(weights[c] for c in per_class)
    p_w = sum(weights[c] * per_class[c][0] for c in per_class) / total
    r_w = sum(weights[c] * per_class[c][1] for c in per_class) / total
    if p_w == 0.0 or r_w == 0.0:
        f1_w = 0.0
    else:
        f1_w = 2.0 / (1.0 / p_w + 1.0 / r_w)
    return {"precision": p_w, "recall": r_w, "f1": f1_w}


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0.0 else 2.0 * p * r / (p + r)


def per_class_precision_recall(pred: list, truth: list, classes=DEFAULT_CLASSES) -> dict:
    """(precision, recall) per in-set class; OOD predictions count against recall only."""
    out = {}
    for c in classes:
        tp = sum(1 for p, t in zip(pred, truth) if p == c and t == c)
        predicted = sum(1 for p in pred if p == c)
        actual = sum(1 for t in truth if t == c)
        precision = tp / predicted if predicted else 0.0
        recall = tp / actual if actual else 0.0
        out[c] = (precision, recall)
    return out


def macro_f1(pred: list, truth: list, classes=DEFAULT_CLASSES) -> float:
    per_class = per_class_precision_recall(pred, truth, classes)
    return float(np.mean([_f1(p, r) for p, r in per_class.values()]))


def confusion_matrix(pred: list, truth: list, classes=DEFAULT_CLASSES) -> tuple[list, np.ndarray]:
    """Counts over labels classes + OOD; rows are truth, columns predictions."""
    labels = list(classes) + [OOD]
    index = {lab: i for i, lab in enumerate(labels)}
    matrix = np.zeros((len(labels), len(labels)), dtype=int)
    for p, t in zip(pred, truth):
        pi = index.get(p, index[OOD])
        ti = index.get(t, index[OOD])
        matrix[ti, pi] += 1
    return labels, matrix


@dataclass
class EvalReport:
    classes: tuple = DEFAULT_CLASSES
    per_class: dict = field(default_factory=dict)     # label -> {precision, recall, f1}
    macro: dict = field(default_factory=dict)
    weighted: dict = field(default_factory=dict)
    mae: float = 0.0
    mse: float = 0.0
    confusion_labels: list = field(default_factory=list)
    confusion: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "per_class": {
                str(c): dict(stats) for c, stats in sorted(self.per_class.items())
            },
            "macro": dict(self.macro),
            "weighted": dict(self.weighted),
            "mae": self.mae,
            "mse": self.mse,
            "confusion_labels": [str(v) for v in self.confusion_labels],
            "confusion": self.confusion.tolist() if self.confusion is not None else [],
        }


def evaluate(pred: list, truth: list, classes=DEFAULT_CLASSES) -> EvalReport:
    """Full report from raw predicted/true counts (ints; non-set preds become OOD)."""
    if len(pred) != len(truth) or not pred:
        raise MetricsError("prediction/truth lists must be equal-length and non-empty")
    mapped = [p if p in classes else OOD for p in pred]
    pr = per_class_precision_recall(mapped, truth, classes)
    per_class = {
        c: {"precision": p, "recall": r, "f1": _f1(p, r)} for c, (p, r) in pr.items()
    }
    macro = {
        "precision": float(np.mean([v["precision"] for v in per_class.values()])),
        "recall": float(np.mean([v["recall"] for v in per_class.values()])),
        "f1": float(np.mean([v["f1"] for v in per_class.values()])),
    }
    weighted = weighted_metrics(pr)
    errors = counting_errors(pred, truth)
    labels, matrix = confusion_matrix(mapped, truth, classes)
    return EvalReport(
        classes=tuple(classes),
        per_class=per_class,
        macro=macro,
        weighted=weighted,
        mae=errors["mae"],
        mse=errors["mse"],
        confusion_labels=labels,
        confusion=matrix,
    )


def write_report(report: EvalReport, out_dir) -> None:
    """JSON + human-readable table + confusion CSV."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    lines = [f"{'class':>8} {'precision':>10} {'recall':>10} {'f1':>10}"]
    for c, stats in sorted(report.per_class.items()):
        lines.append(
            f"{c:>8} {stats['precision']:>10.4f} {stats['recall']:>10.4f} {stats['f1']:>10.4f}"
        )
    lines.append(
        f"{'macro':>8} {report.macro['precision']:>10.4f} "
        f"{report.macro['recall']:>10.4f} {report.macro['f1']:>10.4f}"
    )
    lines.append(
        f"{'weighted':>8} {report.weighted['precision']:>10.4f} "
        f"{report.weighted['recall']:>10.4f} {report.weighted['f1']:>10.4f}"
    )
    lines.append(f"MAE {report.mae:.4f}  MSE {report.mse:.4f}")
    with open(out / "report.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    with open(out / "confusion.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["truth\\pred"] + [str(v) for v in report.confusion_labels])
        for lab, row in zip(report.confusion_labels, report.confusion):
            writer.writerow([str(lab)] + [int(v) for v in row])
