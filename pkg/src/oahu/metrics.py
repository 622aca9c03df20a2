"""Evaluation metrics: error rate, macro-F1, constraint utilization, ROC/AUC,
and Recall@K.

The AUC is computed two independent ways (trapezoidal integration of the
threshold-swept curve, and the pairwise ranking statistic with ties counted
one half); they must agree to float precision, which the tests enforce.
All functions are pure.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import MetricError


def _check_label_args(y_true, y_pred) -> tuple[list, list]:
    y_true = list(y_true)
    y_pred = list(y_pred)
    if not y_true:
        raise ValueError("label sequences are empty")
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    return y_true, y_pred


def error_rate(y_true, y_pred) -> float:
    """Fraction of mismatched predictions."""
    y_true, y_pred = _check_label_args(y_true, y_pred)
    wrong = sum(1 for t, p in zip(y_true, y_pred) if t != p)
    return wrong / len(y_true)


def macro_f1(y_true, y_pred) -> float:
    """Unweighted mean of per-class F1 over the classes present in y_true.

    A precision or recall of 0/0 counts as 0, so a class that is never
    predicted simply contributes a zero F1 to the mean.
    """
    y_true, y_pred = _check_label_args(y_true, y_pred)
    tp: Counter = Counter()
    fp: Counter = Counter()
    fn: Counter = Counter()
    for t, p in zip(y_true, y_pred):
        if t == p:
            tp[t] += 1
        else:
            fn[t] += 1
            fp[p] += 1

    scores = []
    for label in sorted(set(y_true)):
        precision = tp[label] / (tp[label] + fp[label]) if tp[label] + fp[label] else 0.0
        recall = tp[label] / (tp[label] + fn[label]) if tp[label] + fn[label] else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        scores.append(f1)
    return float(np.mean(scores))


def utilization(log) -> float:
    """Fraction of stream constraints that produced a model update."""
    if log.step_count == 0:
        raise ValueError("empty training log")
    return log.contributed_count / log.step_count


def _check_binary(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError(f"scores {scores.shape} and labels {labels.shape} must be equal-length vectors")
    if not labels.any() or labels.all():
        raise MetricError("ROC needs at least one positive and one negative label")
    return scores, labels


def roc_curve(scores, labels) -> list[tuple[float, float]]:
    """(FPR, TPR) points swept over the distinct scores, descending.

    Tied scores move together, so the curve is well defined under ties; it
    always starts at (0, 0) and ends at (1, 1).
    """
    scores, labels = _check_binary(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]

    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < sorted_scores.size:
        j = i
        while j < sorted_scores.size and sorted_scores[j] == sorted_scores[i]:
            j += 1
        group = sorted_labels[i:j]
        tp += int(group.sum())
        fp += int(group.size - group.sum())
        points.append((fp / n_neg, tp / n_pos))
        i = j
    return points


def trapezoid_auc(points) -> float:
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def pairwise_ranking_auc(scores, labels) -> float:
    """Fraction of positive-negative pairs ranked correctly, ties counted 1/2."""
    scores, labels = _check_binary(scores, labels)
    pos = scores[labels]
    neg = scores[~labels]
    greater = (pos[:, None] > neg[None, :]).sum()
    equal = (pos[:, None] == neg[None, :]).sum()
    return float((greater + 0.5 * equal) / (pos.size * neg.size))


def roc_auc(scores, labels) -> tuple[list[tuple[float, float]], float]:
    """ROC curve points and the area under them."""
    points = roc_curve(scores, labels)
    return points, trapezoid_auc(points)


def recall_at_k(query_labels, retrieved_ids, id_to_label, k: int) -> float:
    """Mean indicator that some same-class item appears in the top k retrieved."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    query_labels = list(query_labels)
    retrieved_ids = list(retrieved_ids)
    if not query_labels:
        raise ValueError("no queries")
    if len(query_labels) != len(retrieved_ids):
        raise ValueError(
            f"length mismatch: {len(query_labels)} queries vs {len(retrieved_ids)} result lists"
        )
    hits = 0
    for label, retrieved in zip(query_labels, retrieved_ids):
        hits += any(id_to_label[item] == label for item in list(retrieved)[:k])
    return hits / len(query_labels)


@dataclass
class EvalReport:
    """One evaluation run: task tag, metric values, sizes, config echo."""

    task: str
    metrics: dict[str, float]
    test_size: int
    class_count: int
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, value in self.metrics.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"metric {name!r} = {value!r} is not a rate in [0, 1]")

    def to_json(self) -> str:
        return json.dumps(
            {
                "task": self.task,
                "metrics": self.metrics,
                "test_size": self.test_size,
                "class_count": self.class_count,
                "config": self.config,
            }
        )


def write_curve(points, path) -> None:
    """Two-column text export of curve points for plotting."""
    with open(path, "w", encoding="utf-8") as fh:
        for x, y in points:
            fh.write(f"{x!r} {y!r}\n")
