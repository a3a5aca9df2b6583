"""ROC/AUC, precision-recall, average precision, and subgroup evaluation.

Thresholds sweep the distinct scores in descending order with ties grouped;
AUC is the trapezoidal integral (equivalent to the half-credit rank
convention of the Mann-Whitney statistic), and average precision is the
recall-increment-weighted sum of precisions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricsError(ValueError):
    pass


class SubgroupTooSmall(ValueError):
    pass


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


@dataclass
class PrCurve:
    recall: np.ndarray
    precision: np.ndarray
    ap: float

    @property
    def points(self):
        return list(zip(self.recall.tolist(), self.precision.tolist()))


def _tie_grouped_counts(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise MetricsError("scores/labels length mismatch")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order].astype(np.float64)
    # Indices where a tie block ends.
    distinct = np.flatnonzero(np.diff(s)) if s.size > 1 else np.array([], int)
    block_ends = np.append(distinct, s.size - 1)
    cum_tp = np.cumsum(y)[block_ends]
    cum_fp = (block_ends + 1) - cum_tp
    return s[block_ends], cum_tp, cum_fp


def roc(scores, labels) -> RocCurve:
    """ROC curve from (0,0) to (1,1) with trapezoidal AUC."""
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("roc requires both classes present")
    _, cum_tp, cum_fp = _tie_grouped_counts(scores, labels)
    tpr = np.concatenate([[0.0], cum_tp / n_pos])
    fpr = np.concatenate([[0.0], cum_fp / n_neg])
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(fpr=fpr, tpr=tpr, auc=auc)


def average_precision(scores, labels) -> float:
    """AP = sum over descending-score thresholds of
    (recall_i - recall_{i-1}) * precision_i, ties grouped."""
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0:
        raise MetricsError("average_precision requires at least one positive")
    _, cum_tp, cum_fp = _tie_grouped_counts(scores, labels)
    recall = cum_tp / n_pos
    precision = cum_tp / (cum_tp + cum_fp)
    prev = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev) * precision))


def pr_curve(scores, labels) -> PrCurve:
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0:
        raise MetricsError("pr_curve requires at least one positive")
    _, cum_tp, cum_fp = _tie_grouped_counts(scores, labels)
    recall = cum_tp / n_pos
    precision = cum_tp / (cum_tp + cum_fp)
    ap = average_precision(scores, labels)
    return PrCurve(recall=recall, precision=precision, ap=ap)


def evaluate_subgroup(scores, labels, member_mask, floor: int = 50):
    """Metrics restricted to a subgroup. Refuses subgroups below the floor
    in either class (the base prevalence is reported alongside because it
    differs per subgroup)."""
    from .likelihood import ScoredCohort, lr_curve

    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    member_mask = np.asarray(member_mask, dtype=bool)
    s, y = scores[member_mask], labels[member_mask]
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos < floor or n_neg < floor:
        raise SubgroupTooSmall(
            f"subgroup has {n_pos} positives / {n_neg} controls; "
            f"need at least {floor} of each")
    cohort = ScoredCohort.from_arrays(s, y)
    return {
        "roc": roc(s, y),
        "pr": pr_curve(s, y),
        "lr": lr_curve(cohort),
        "prevalence": n_pos / (n_pos + n_neg),
        "n": int(member_mask.sum()),
    }
