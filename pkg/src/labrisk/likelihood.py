"""Likelihood ratios from risk scores.

The pre-test odds come from the full development cohort prevalence; the
post-test odds from a subgroup (either everyone above a risk threshold, for
LR-vs-threshold curves, or the CI-based similar-score cohort, for per-patient
reports). Degenerate all-positive/all-negative subgroups get a 0.5/0.5
continuity correction and are flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import EncounterRecord, MarkerCatalog
from .model import RiskAssessment
from .preprocess import NormalizationParams, normalize_value


class LikelihoodError(ValueError):
    pass


def odds(p: float) -> float:
    if not 0.0 <= p < 1.0:
        raise LikelihoodError(f"odds needs p in [0, 1), got {p}")
    return p / (1.0 - p)


def likelihood_ratio(post_p: float, pre_p: float) -> float:
    if not 0.0 < pre_p < 1.0:
        raise LikelihoodError("pre-test probability must be in (0, 1)")
    return odds(post_p) / odds(pre_p)


def lr_from_counts(pos_sub: int, n_sub: int, pos_all: int,
                   n_all: int) -> tuple[float, bool]:
    """LR of a count-defined subgroup vs the full cohort.

    Returns (lr, corrected): when the subgroup is all-positive or
    all-negative, 0.5 is added to both cells and the result is flagged.
    """
    if n_sub <= 0:
        raise LikelihoodError("empty subgroup")
    if not 0 < pos_all < n_all:
        raise LikelihoodError("cohort must contain both classes")
    if pos_sub == pos_all and n_sub == n_all:
        return 1.0, False  # subgroup is the whole cohort: LR is exactly 1
    pre = odds(pos_all / n_all)
    neg_sub = n_sub - pos_sub
    corrected = pos_sub == 0 or neg_sub == 0
    if corrected:
        post = (pos_sub + 0.5) / (neg_sub + 0.5)
    else:
        post = pos_sub / neg_sub
    return post / pre, corrected


@dataclass
class ScoredCohort:
    patient_ids: list[str]
    scores: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_arrays(cls, scores, labels, patient_ids=None) -> "ScoredCohort":
        scores = np.asarray(scores, dtype=np.float64)
        labels = np.asarray(labels).astype(np.int64)
        if patient_ids is None:
            patient_ids = [str(i) for i in range(scores.size)]
        if not (len(patient_ids) == scores.size == labels.size):
            raise LikelihoodError("scored cohort length mismatch")
        if scores.size == 0:
            raise LikelihoodError("empty scored cohort")
        return cls(patient_ids=list(patient_ids), scores=scores, labels=labels)

    def __len__(self) -> int:
        return self.scores.size

    @property
    def n_pos(self) -> int:
        return int(self.labels.sum())

    @property
    def prevalence(self) -> float:
        return self.n_pos / len(self)

    def subset(self, idx) -> "ScoredCohort":
        idx = np.asarray(idx)
        return ScoredCohort(
            patient_ids=[self.patient_ids[i] for i in idx],
            scores=self.scores[idx], labels=self.labels[idx])


def similar_cohort(dev: ScoredCohort, assessment: RiskAssessment,
                   min_n: int = 50) -> ScoredCohort:
    """Development entries with scores inside the assessment CI, expanded to
    the min_n nearest neighbors by |score - mean| when too few fall inside."""
    lo, hi = assessment.ci
    inside = np.flatnonzero((dev.scores >= lo) & (dev.scores <= hi))
    if inside.size >= min_n:
        return dev.subset(inside)
    k = min(min_n, len(dev))
    dist = np.abs(dev.scores - assessment.mean)
    nearest = np.lexsort((np.arange(len(dev)), dist))[:k]
    return dev.subset(np.sort(nearest))


@dataclass
class LRCurve:
    thresholds: np.ndarray
    lr: np.ndarray
    n_above: np.ndarray
    n_pos_above: np.ndarray
    corrected: np.ndarray
    truncated_at: float | None = None  # first threshold with empty subgroup


def lr_curve(cohort: ScoredCohort, thresholds=None) -> LRCurve:
    """LR(t) for subgroups {score >= t}. LR at the all-inclusive threshold is
    exactly 1; the curve is truncated when a subgroup becomes empty."""
    if thresholds is None:
        thresholds = np.linspace(0.0, 1.0, 101)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    n_all = len(cohort)
    pos_all = cohort.n_pos
    ts, lrs, n_ab, np_ab, corr = [], [], [], [], []
    truncated_at = None
    for t in thresholds:
        sel = cohort.scores >= t
        n_sub = int(sel.sum())
        if n_sub == 0:
            truncated_at = float(t)
            break
        pos_sub = int(cohort.labels[sel].sum())
        lr, corrected = lr_from_counts(pos_sub, n_sub, pos_all, n_all)
        ts.append(float(t))
        lrs.append(lr)
        n_ab.append(n_sub)
        np_ab.append(pos_sub)
        corr.append(corrected)
    return LRCurve(thresholds=np.array(ts), lr=np.array(lrs),
                   n_above=np.array(n_ab), n_pos_above=np.array(np_ab),
                   corrected=np.array(corr, dtype=bool),
                   truncated_at=truncated_at)


# --- baselines ---------------------------------------------------------------

def oor_score(record: EncounterRecord,
              catalog: MarkerCatalog) -> tuple[float, bool]:
    """Fraction of measured, range-bearing markers outside their reference
    range. Returns (score, no_ranged_markers_flag)."""
    measured = 0
    out = 0
    for mid, v in record.measurements.items():
        rr = catalog.get(mid).reference_range if mid in catalog else None
        if rr is None:
            continue
        measured += 1
        if not rr[0] <= v <= rr[1]:
            out += 1
    if measured == 0:
        return 0.0, True
    return out / measured, False


@dataclass
class SingleMarkerScaler:
    """Min-max scaling of a single marker over the development cohort, with
    the orientation flipped for low-is-risk markers."""
    marker_id: str
    low: float
    high: float
    flip: bool

    @classmethod
    def fit(cls, dev_records: list[EncounterRecord], marker_id: str,
            catalog: MarkerCatalog,
            params: NormalizationParams) -> "SingleMarkerScaler":
        marker = catalog.get(marker_id)
        vals = []
        for r in dev_records:
            v = r.measurements.get(marker_id)
            if v is not None:
                vals.append(normalize_value(v, marker_id, params)
                            if marker.log_transform else v)
        if len(vals) < 2 or min(vals) == max(vals):
            raise LikelihoodError(
                f"cannot fit single-marker scaler for {marker_id!r}")
        return cls(marker_id=marker_id, low=min(vals), high=max(vals),
                   flip=marker.risk_direction == "low_is_risk")

    def score(self, record: EncounterRecord, catalog: MarkerCatalog,
              params: NormalizationParams) -> float | None:
        v = record.measurements.get(self.marker_id)
        if v is None:
            return None
        if catalog.get(self.marker_id).log_transform:
            v = normalize_value(v, self.marker_id, params)
        s = (v - self.low) / (self.high - self.low)
        s = min(1.0, max(0.0, s))
        return 1.0 - s if self.flip else s


def age_score(age: float) -> float:
    """Age normalized between 40 and 85 years, clamped to [0, 1]."""
    return min(1.0, max(0.0, (age - 40.0) / (85.0 - 40.0)))


# --- per-patient report ------------------------------------------------------

@dataclass
class LRReport:
    patient_id: str
    cancer_type: str
    score: float
    ci: tuple[float, float]
    similar_cohort_size: int
    pre_test_probability: float
    post_test_probability: float
    pre_test_odds: float
    post_test_odds: float
    lr: float
    corrected: bool
    per_member_scores: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "cancer_type": self.cancer_type,
            "risk_score": self.score,
            "risk_ci": list(self.ci),
            "similar_cohort_size": self.similar_cohort_size,
            "pre_test_probability": self.pre_test_probability,
            "post_test_probability": self.post_test_probability,
            "pre_test_odds": self.pre_test_odds,
            "post_test_odds": self.post_test_odds,
            "likelihood_ratio": self.lr,
            "continuity_corrected": self.corrected,
            "per_member_scores": self.per_member_scores,
        }

    def to_text(self) -> str:
        lines = [
            f"Risk assessment for patient {self.patient_id} "
            f"({self.cancer_type} cancer, 12-month horizon)",
            f"  Ensemble risk score : {self.score:.3f} "
            f"(CI {self.ci[0]:.3f} - {self.ci[1]:.3f})",
            f"  Similar-score cohort: {self.similar_cohort_size} patients",
            f"  Pre-test probability : {self.pre_test_probability:.4f} "
            f"(odds {self.pre_test_odds:.4f})",
            f"  Post-test probability: {self.post_test_probability:.4f} "
            f"(odds {self.post_test_odds:.4f})",
            f"  Likelihood ratio     : {self.lr:.2f}"
            + ("  [continuity corrected]" if self.corrected else ""),
        ]
        return "\n".join(lines)


def build_report(patient_id: str, cancer_type: str,
                 assessment: RiskAssessment, dev: ScoredCohort,
                 min_n: int = 50) -> LRReport:
    similar = similar_cohort(dev, assessment, min_n=min_n)
    pos_sub, n_sub = similar.n_pos, len(similar)
    lr, corrected = lr_from_counts(pos_sub, n_sub, dev.n_pos, len(dev))
    pre_p = dev.prevalence
    post_p = pos_sub / n_sub
    post_odds = ((pos_sub + 0.5) / (n_sub - pos_sub + 0.5) if corrected
                 else odds(post_p))
    return LRReport(
        patient_id=patient_id, cancer_type=cancer_type,
        score=assessment.mean, ci=assessment.ci,
        similar_cohort_size=n_sub,
        pre_test_probability=pre_p, post_test_probability=post_p,
        pre_test_odds=odds(pre_p), post_test_odds=post_odds,
        lr=lr, corrected=corrected,
        per_member_scores=assessment.per_member_scores)
