"""Binary classification metrics with explicit degenerate-case handling.

The positive class is label 1 throughout.  Ratios with zero denominators are
reported as 0 and named in ``Metrics.flags`` instead of raising or returning
NaN.  ROC-AUC is the trapezoid over the threshold-swept curve (equal to the
concordant-pair fraction with ties counted half); PR-AUC is step-interpolated
average precision.  Both are None when y_true has a single class.
"""

from __future__ import annotations

import numpy as np

from abaf.types import Metrics


def _cumulative_counts(y: np.ndarray, scores: np.ndarray):
    """(tp, fp) counts at each distinct score cut, descending thresholds.

    Tied scores collapse into one cut, so ROC ties contribute half via the
    trapezoid and PR ties are grouped for average precision.
    """
    order = np.argsort(-scores, kind="stable")
    y_sorted = y[order]
    boundary = np.flatnonzero(np.diff(scores[order])) + 1
    ends = np.append(boundary - 1, y.size - 1)
    tp = np.cumsum(y_sorted)[ends].astype(np.float64)
    n_pred = np.append(boundary, y.size).astype(np.float64)
    return tp, n_pred - tp


def roc_curve_points(y_true, y_score):
    """(fpr, tpr) arrays starting at (0, 0); needs both classes present."""
    y = np.asarray(y_true).astype(np.int64).ravel()
    s = np.asarray(y_score, dtype=np.float64).ravel()
    tp, fp = _cumulative_counts(y, s)
    if tp[-1] == 0 or fp[-1] == 0:
        raise ValueError("ROC curve undefined for single-class y_true")
    tpr = np.concatenate([[0.0], tp]) / tp[-1]
    fpr = np.concatenate([[0.0], fp]) / fp[-1]
    return fpr, tpr


def pr_curve_points(y_true, y_score):
    """(recall, precision) arrays starting at recall 0; both classes needed."""
    y = np.asarray(y_true).astype(np.int64).ravel()
    s = np.asarray(y_score, dtype=np.float64).ravel()
    tp, fp = _cumulative_counts(y, s)
    if tp[-1] == 0 or fp[-1] == 0:
        raise ValueError("PR curve undefined for single-class y_true")
    precision = tp / (tp + fp)
    recall = tp / tp[-1]
    return (
        np.concatenate([[0.0], recall]),
        np.concatenate([[precision[0]], precision]),
    )


def _roc_auc(y: np.ndarray, scores: np.ndarray) -> float:
    fpr, tpr = roc_curve_points(y, scores)
    return float(np.trapezoid(tpr, fpr))


def _pr_auc(y: np.ndarray, scores: np.ndarray) -> float:
    tp, fp = _cumulative_counts(y, scores)
    precision = tp / (tp + fp)
    recall = tp / tp[-1]
    return float(np.sum(np.diff(np.concatenate([[0.0], recall])) * precision))


def compute_metrics(y_true, y_score, threshold: float = 0.5) -> Metrics:
    """Metrics at a decision threshold (predict 1 iff score >= threshold)."""
    y = np.asarray(y_true).astype(np.int64).ravel()
    s = np.asarray(y_score, dtype=np.float64).ravel()
    if y.shape != s.shape or y.size == 0:
        raise ValueError(f"shapes disagree or empty: {y.shape} vs {s.shape}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("y_true must be binary 0/1")
    if s.min() < 0.0 or s.max() > 1.0:
        raise ValueError("y_score entries must lie in [0, 1]")

    pred = (s >= threshold).astype(np.int64)
    tp = int(((y == 1) & (pred == 1)).sum())
    fp = int(((y == 0) & (pred == 1)).sum())
    fn = int(((y == 1) & (pred == 0)).sum())
    tn = int(((y == 0) & (pred == 0)).sum())
    confusion = np.array([[tn, fp], [fn, tp]], dtype=np.int64)

    flags: list[str] = []

    def ratio(num: int, den: int, flag: str) -> float:
        if den == 0:
            flags.append(flag)
            return 0.0
        return num / den

    acc = (tp + tn) / y.size
    precision = ratio(tp, tp + fp, "precision_undefined")
    recall = ratio(tp, tp + fn, "recall_undefined")
    f1 = ratio(int(2 * tp), 2 * tp + fp + fn, "f1_undefined")
    precision0 = ratio(tn, tn + fn, "neg_precision_undefined")
    recall0 = ratio(tn, tn + fp, "neg_recall_undefined")
    f1_0 = ratio(int(2 * tn), 2 * tn + fn + fp, "neg_f1_undefined")
    del precision0, recall0  # components of f1_0 kept only for their flags

    n1 = int((y == 1).sum())
    n0 = y.size - n1
    macro_f1 = (f1 + f1_0) / 2.0
    weighted_f1 = (n1 * f1 + n0 * f1_0) / y.size

    single_class = n1 == 0 or n0 == 0
    roc = None if single_class else _roc_auc(y, s)
    pr = None if single_class else _pr_auc(y, s)
    if single_class:
        flags.append("auc_undefined_single_class")

    return Metrics(
        acc=acc,
        precision=precision,
        recall=recall,
        f1=f1,
        macro_avg_f1=macro_f1,
        weighted_avg_f1=weighted_f1,
        roc_auc=roc,
        pr_auc=pr,
        confusion=confusion,
        flags=tuple(flags),
    )
