"""Binary classification metrics over class labels {1, 2}.

Metrics with a zero denominator are reported as ``None`` rather than 0.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import InputDomainError, UndefinedMetricError

__all__ = ["ConfusionMatrix", "MetricsReport", "confusion", "metrics", "auc", "evaluate"]

LABELS = (1, 2)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """``counts[t-1, p-1]`` = number of students with true class t predicted as p."""

    counts: np.ndarray

    @property
    def total(self):
        return int(self.counts.sum())


def _labels(name, labels):
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise InputDomainError(f"{name} must be one-dimensional")
    bad = ~np.isin(arr, LABELS)
    if np.any(bad):
        raise InputDomainError(f"{name}[{int(np.argmax(bad))}] = {arr[bad][0]!r} is not a class label in {LABELS}")
    return arr.astype(int)


def confusion(true_labels, predicted_labels):
    truth = _labels("true_labels", true_labels)
    pred = _labels("predicted_labels", predicted_labels)
    if truth.size != pred.size:
        raise InputDomainError(f"length mismatch: {truth.size} true vs {pred.size} predicted labels")
    if truth.size == 0:
        raise InputDomainError("no labels to compare")
    counts = np.zeros((2, 2), dtype=np.int64)
    np.add.at(counts, (truth - 1, pred - 1), 1)
    counts.setflags(write=False)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    recall: dict
    precision: dict
    f1: dict
    auc: float = None
    n: int = 0

    def to_json(self):
        doc = asdict(self)
        for key in ("recall", "precision", "f1"):
            doc[key] = {str(k): v for k, v in doc[key].items()}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_text(self):
        def pct(v):
            return "absent" if v is None else f"{100 * v:.2f}%"

        rows = [("Accuracy", pct(self.accuracy))]
        for name, values in (("Recall", self.recall), ("Precision", self.precision), ("F1 Score", self.f1)):
            rows.append((name, f"Class 1: {pct(values[1])}"))
            rows.append(("", f"Class 2: {pct(values[2])}"))
        rows.append(("AUC Score", "absent" if self.auc is None else f"{self.auc:.4f}"))
        width = max(len(r[0]) for r in rows)
        return "".join(f"{a:<{width}} | {b}\n" for a, b in rows)


def _ratio(num, den):
    return None if den == 0 else float(num / den)


def metrics(cm, auc_value=None):
    """Accuracy plus per-class recall, precision and F1 from a confusion matrix."""
    c = np.asarray(cm.counts)
    if c.sum() == 0:
        raise InputDomainError("confusion matrix is empty")
    recall, precision, f1 = {}, {}, {}
    for k, label in enumerate(LABELS):
        recall[label] = _ratio(c[k, k], c[k].sum())
        precision[label] = _ratio(c[k, k], c[:, k].sum())
        p, r = precision[label], recall[label]
        f1[label] = None if p is None or r is None or p + r == 0 else 2 * p * r / (p + r)
    return MetricsReport(float(np.trace(c) / c.sum()), recall, precision, f1, auc_value, int(c.sum()))


def auc(scores, true_labels):
    """Area under the ROC curve as the Mann-Whitney statistic.

    Higher scores mean "more class 2"; tied pairs count one half.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    truth = _labels("true_labels", true_labels)
    if scores.size != truth.size:
        raise InputDomainError(f"length mismatch: {scores.size} scores vs {truth.size} labels")
    pos = truth == 2
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC is undefined when only one class is present")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def evaluate(true_labels, predicted_labels, scores=None):
    """Full report; the AUC is ``None`` when ``scores`` is missing or one class is absent."""
    report = metrics(confusion(true_labels, predicted_labels))
    if scores is None:
        return report
    try:
        value = auc(scores, true_labels)
    except UndefinedMetricError:
        value = None
    return MetricsReport(report.accuracy, report.recall, report.precision, report.f1, value, report.n)
