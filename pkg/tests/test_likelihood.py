"""Likelihood-ratio arithmetic, subgroup curves, and baseline scores."""

import numpy as np
import pytest

from labrisk import defaults, likelihood
from labrisk.catalog import EncounterRecord
from labrisk.model import RiskAssessment
from labrisk.preprocess import NormalizationParams

import datetime


def test_odds_and_lr_basics():
    assert likelihood.odds(0.5) == 1.0
    assert likelihood.odds(0.2) == pytest.approx(0.25)
    assert likelihood.likelihood_ratio(0.5, 0.2) == pytest.approx(4.0)


def test_hand_example_lr_six():
    # Pre-test 2 of 10, post-test 3 of 5: (3/2) / (2/8) = 6.
    lr, corrected = likelihood.lr_from_counts(3, 5, 2, 10)
    assert lr == pytest.approx(6.0, abs=1e-12)
    assert not corrected


def test_continuity_correction_flagged():
    lr, corrected = likelihood.lr_from_counts(0, 5, 2, 10)
    assert corrected
    assert lr > 0.0
    lr2, corrected2 = likelihood.lr_from_counts(5, 5, 2, 10)
    assert corrected2
    assert np.isfinite(lr2)


def cohort_from(rng, n=400, prevalence=0.25):
    labels = (rng.random(n) < prevalence).astype(float)
    scores = np.clip(rng.normal(0.4 + 0.2 * labels, 0.15), 0, 1)
    return likelihood.ScoredCohort.from_arrays(scores, labels)


def test_lr_curve_starts_at_exactly_one():
    cohort = cohort_from(np.random.default_rng(0))
    curve = likelihood.lr_curve(cohort)
    assert curve.thresholds[0] == 0.0
    assert curve.lr[0] == 1.0  # exact: subgroup == whole cohort


def test_lr_curve_truncates_on_empty_subgroup():
    cohort = likelihood.ScoredCohort.from_arrays(
        np.array([0.1, 0.2, 0.3, 0.4]), np.array([0, 1, 0, 1]))
    curve = likelihood.lr_curve(cohort, np.linspace(0, 1, 11))
    assert curve.truncated_at == pytest.approx(0.5)
    assert curve.thresholds[-1] == pytest.approx(0.4)


def test_lr_curve_matches_manual_counts():
    cohort = cohort_from(np.random.default_rng(1))
    curve = likelihood.lr_curve(cohort, np.array([0.0, 0.5]))
    sel = cohort.scores >= 0.5
    lr, _ = likelihood.lr_from_counts(int(cohort.labels[sel].sum()),
                                      int(sel.sum()),
                                      int(cohort.labels.sum()), len(cohort))
    assert curve.lr[1] == pytest.approx(lr, abs=1e-12)


def test_permutation_null_lr_band():
    """With labels shuffled, LR(t) stays inside the simulated 95% band."""
    rng = np.random.default_rng(2)
    n, prevalence = 600, 0.3
    labels = (rng.random(n) < prevalence).astype(float)
    scores = rng.random(n)
    thresholds = np.linspace(0.0, 0.8, 9)
    # Simulate the null distribution of LR(t) under label permutation.
    sims = np.empty((200, len(thresholds)))
    for s in range(sims.shape[0]):
        perm = rng.permutation(labels)
        c = likelihood.ScoredCohort.from_arrays(scores, perm)
        sims[s] = likelihood.lr_curve(c, thresholds).lr
    lo = np.quantile(sims, 0.025, axis=0)
    hi = np.quantile(sims, 0.975, axis=0)
    observed = likelihood.lr_curve(
        likelihood.ScoredCohort.from_arrays(scores, labels), thresholds).lr
    assert np.all(observed >= lo - 1e-12)
    assert np.all(observed <= hi + 1e-12)


def test_similar_cohort_ci_filter_and_expansion():
    scores = np.linspace(0, 1, 101)
    labels = (scores > 0.5).astype(float)
    dev = likelihood.ScoredCohort.from_arrays(scores, labels)
    wide = RiskAssessment(per_member_scores=[0.5], mean=0.5, std=0.2,
                          ci=(0.3, 0.7))
    sub = likelihood.similar_cohort(dev, wide, min_n=10)
    assert np.all((sub.scores >= 0.3) & (sub.scores <= 0.7))
    narrow = RiskAssessment(per_member_scores=[0.5], mean=0.5, std=0.001,
                            ci=(0.499, 0.501))
    expanded = likelihood.similar_cohort(dev, narrow, min_n=25)
    assert len(expanded) == 25
    # Expansion picks the nearest scores to the ensemble mean.
    assert np.abs(expanded.scores - 0.5).max() <= 0.13


def _record(measurements, age=60.0, sex="female"):
    return EncounterRecord(patient_id="p1", encounter_id="e1",
                           date=datetime.date(2020, 1, 1), age_years=age,
                           sex=sex, measurements=measurements)


def test_oor_score_counts_out_of_range():
    cat = defaults.default_catalog()
    alb = cat.get("albumin").reference_range
    rec = _record({"albumin": alb[0] - 1.0, "calcium": 9.5, "sodium": 140.0})
    score, flagged = likelihood.oor_score(rec, cat)
    assert score == pytest.approx(1.0 / 3.0)
    rec_ok = _record({"albumin": 4.0, "calcium": 9.5})
    assert likelihood.oor_score(rec_ok, cat)[0] == 0.0


def test_age_score_clamps():
    assert likelihood.age_score(40.0) == 0.0
    assert likelihood.age_score(85.0) == 1.0
    assert likelihood.age_score(100.0) == 1.0
    assert likelihood.age_score(62.5) == pytest.approx(0.5)


def test_single_marker_scaler_flips_low_is_risk():
    cat = defaults.default_catalog()
    rng = np.random.default_rng(3)
    dev = [_record({"albumin": float(v), "alp": float(a)})
           for v, a in zip(rng.uniform(3.0, 5.0, 50),
                           rng.uniform(50, 300, 50))]
    feats = ("albumin", "alp")
    params = NormalizationParams(
        median={f: 0.0 for f in feats}, iqd={f: 1.0 for f in feats},
        log_transform={"albumin": False, "alp": True},
        detection_limit={f: 1e-3 for f in feats}, feature_order=feats)
    # Albumin: low values signal risk, so lower raw value -> higher score.
    scaler = likelihood.SingleMarkerScaler.fit(dev, "albumin", cat, params)
    low = scaler.score(_record({"albumin": 3.1}), cat, params)
    high = scaler.score(_record({"albumin": 4.9}), cat, params)
    assert low > high
    # ALP: high values signal risk.
    scaler2 = likelihood.SingleMarkerScaler.fit(dev, "alp", cat, params)
    assert scaler2.score(_record({"alp": 290.0}), cat, params) > \
        scaler2.score(_record({"alp": 60.0}), cat, params)
    # Missing marker -> no score.
    assert scaler.score(_record({"alp": 100.0}), cat, params) is None


def test_build_report_round_trip():
    rng = np.random.default_rng(4)
    dev = cohort_from(rng, n=500)
    assessment = RiskAssessment(per_member_scores=[0.7, 0.75, 0.72],
                                mean=0.72, std=0.02, ci=(0.70, 0.74))
    report = likelihood.build_report("p9", "liver", assessment, dev)
    d = report.to_dict()
    assert d["patient_id"] == "p9"
    assert d["likelihood_ratio"] == pytest.approx(
        likelihood.likelihood_ratio(d["post_test_probability"],
                                    d["pre_test_probability"]))
    text = report.to_text()
    assert "p9" in text and "liver" in text
