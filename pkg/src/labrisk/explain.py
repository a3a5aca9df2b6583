"""Shapley-value attribution of the normalized likelihood ratio.

The attributed function is the full reporting pipeline: feature vector ->
ensemble risk score -> similar-cohort likelihood ratio against the
development cohort -> logistic squashing (mean 5, scale 0.5) so extreme LRs
do not dominate. A feature "absent from a coalition" has its value and its
mask bit replaced from a background draw, so missingness itself is
expressible to the model.

Exact subset enumeration is used when the number of active features is
small; otherwise permutation sampling with antithetic pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .likelihood import ScoredCohort, lr_from_counts, similar_cohort
from .model import RiskAssessment, RiskEnsemble


class ExplainError(ValueError):
    pass


def normalize_lr(lr) -> float | np.ndarray:
    """Logistic squashing of a likelihood ratio: 1/(1+exp(-(lr-5)/0.5))."""
    x = (np.asarray(lr, dtype=np.float64) - 5.0) / 0.5
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out) if out.ndim == 0 else out


class NormalizedLrFn:
    """Batched callable (values, mask) -> normalized LR in (0, 1)."""

    def __init__(self, ensemble: RiskEnsemble, dev: ScoredCohort,
                 min_n: int = 50):
        self.ensemble = ensemble
        self.dev = dev
        self.min_n = min_n

    def __call__(self, values: np.ndarray, mask: np.ndarray) -> np.ndarray:
        values = np.atleast_2d(values)
        mask = np.atleast_2d(mask)
        scores = self.ensemble.predict_batch(values, mask)
        out = np.empty(values.shape[0])
        for i in range(values.shape[0]):
            assessment = RiskAssessment.from_scores(
                scores[i], self.ensemble.config.ci_scale)
            similar = similar_cohort(self.dev, assessment, self.min_n)
            lr, _ = lr_from_counts(similar.n_pos, len(similar),
                                   self.dev.n_pos, len(self.dev))
            out[i] = normalize_lr(lr)
        return out


@dataclass
class ShapConfig:
    max_exact: int = 12  # enumerate exactly up to this many active features
    n_permutations: int = 200  # antithetic pairs count as two
    background_size: int = 256
    seed: int = 0
    min_waterfall_markers: int = 24
    top_k_summary: int = 15
    top_k_waterfall: int = 9
    min_summary_samples: int = 10


@dataclass
class ShapResult:
    phi: np.ndarray
    base_value: float
    fx: float
    method: str  # exact_enumeration | permutation_sampling
    n_samples: int
    seed: int
    ci99: np.ndarray | None = None  # per-feature 99% MC half-width

    @property
    def efficiency_residual(self) -> float:
        return float(self.fx - (self.base_value + self.phi.sum()))


def _compose(values, mask, coalition, bg_values, bg_mask):
    """Sample features inside the coalition, background features outside."""
    v = np.where(coalition, values, bg_values)
    m = np.where(coalition, mask, bg_mask)
    return v, m


def _shap_exact(fn, values, mask, bg_v, bg_m, active, seed) -> ShapResult:
    d = active.size
    n_bg = bg_v.shape[0]
    n_sub = 1 << d
    # Value of every coalition, averaged over the background set.
    coalition = np.zeros_like(values, dtype=bool)
    v_of = np.empty(n_sub)
    rows_v = np.empty((n_bg, values.size))
    rows_m = np.empty((n_bg, values.size))
    for s in range(n_sub):
        coalition[:] = False
        for j in range(d):
            if s >> j & 1:
                coalition[active[j]] = True
        for b in range(n_bg):
            rows_v[b], rows_m[b] = _compose(values, mask, coalition,
                                            bg_v[b], bg_m[b])
        v_of[s] = float(np.mean(fn(rows_v, rows_m)))
    # Shapley weights by coalition size.
    fact = [math.factorial(i) for i in range(d + 1)]
    weight = [fact[k] * fact[d - k - 1] / fact[d] for k in range(d)]
    phi = np.zeros(values.size)
    for j in range(d):
        bit = 1 << j
        for s in range(n_sub):
            if s & bit:
                continue
            k = bin(s).count("1")
            phi[active[j]] += weight[k] * (v_of[s | bit] - v_of[s])
    return ShapResult(phi=phi, base_value=float(v_of[0]),
                      fx=float(v_of[n_sub - 1]),
                      method="exact_enumeration", n_samples=n_sub, seed=seed)


def _shap_sampling(fn, values, mask, bg_v, bg_m, active,
                   n_permutations, seed) -> ShapResult:
    rng = np.random.default_rng(seed)
    d = active.size
    n_bg = bg_v.shape[0]
    n_pairs = max(1, n_permutations // 2)
    contribs = np.zeros((2 * n_pairs, values.size))
    base_draws = np.empty(2 * n_pairs)
    fx = None
    for pair in range(n_pairs):
        perm = rng.permutation(d)
        b = int(rng.integers(n_bg))
        for which, order in enumerate((perm, perm[::-1])):
            row = 2 * pair + which
            # Walk the permutation, adding sample features one at a time.
            walk_v = np.empty((d + 1, values.size))
            walk_m = np.empty((d + 1, values.size))
            coalition = np.zeros_like(values, dtype=bool)
            walk_v[0], walk_m[0] = _compose(values, mask, coalition,
                                            bg_v[b], bg_m[b])
            for step, j in enumerate(order, start=1):
                coalition[active[j]] = True
                walk_v[step], walk_m[step] = _compose(
                    values, mask, coalition, bg_v[b], bg_m[b])
            f = fn(walk_v, walk_m)
            base_draws[row] = f[0]
            fx = float(f[-1])
            for step, j in enumerate(order, start=1):
                contribs[row, active[j]] = f[step] - f[step - 1]
    phi = contribs.mean(axis=0)
    se = contribs.std(axis=0, ddof=1) / math.sqrt(contribs.shape[0])
    return ShapResult(phi=phi, base_value=float(base_draws.mean()), fx=fx,
                      method="permutation_sampling",
                      n_samples=2 * n_pairs, seed=seed, ci99=2.576 * se)


def shap_values(fn, values: np.ndarray, mask: np.ndarray,
                bg_values: np.ndarray, bg_mask: np.ndarray,
                config: ShapConfig | None = None,
                seed: int | None = None) -> ShapResult:
    """Per-feature Shapley attributions of fn at (values, mask) against a
    background set. Deterministic per seed."""
    config = config or ShapConfig()
    if seed is None:
        seed = config.seed
    values = np.asarray(values, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    bg_values = np.atleast_2d(np.asarray(bg_values, dtype=np.float64))
    bg_mask = np.atleast_2d(np.asarray(bg_mask, dtype=np.float64))
    if bg_values.shape[0] == 0:
        raise ExplainError("empty background set")
    active = np.arange(values.size)
    if active.size <= config.max_exact:
        return _shap_exact(fn, values, mask, bg_values, bg_mask, active, seed)
    return _shap_sampling(fn, values, mask, bg_values, bg_mask, active,
                          config.n_permutations, seed)


def draw_background(dev_values: np.ndarray, dev_mask: np.ndarray,
                    dev_labels: np.ndarray, size: int,
                    seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Label-stratified background draw from the development cohort."""
    rng = np.random.default_rng(seed)
    n = dev_values.shape[0]
    if n == 0:
        raise ExplainError("empty development set for background")
    size = min(size, n)
    pos = np.flatnonzero(dev_labels == 1)
    neg = np.flatnonzero(dev_labels == 0)
    n_pos = min(len(pos), max(1, round(size * len(pos) / n))) if len(pos) else 0
    n_neg = size - n_pos
    idx = []
    if n_pos:
        idx.append(rng.choice(pos, size=n_pos, replace=False))
    if n_neg:
        idx.append(rng.choice(neg, size=min(n_neg, len(neg)), replace=False))
    idx = np.sort(np.concatenate(idx))
    return dev_values[idx], dev_mask[idx]


@dataclass
class CohortShapSummary:
    feature_names: list[str]
    phi: np.ndarray  # (n_samples, d)
    feature_values: np.ndarray  # normalized values, (n_samples, d)
    ranking: list[int]  # feature indices by descending mean |phi|
    top_k: int

    def top_features(self) -> list[str]:
        return [self.feature_names[i] for i in self.ranking[:self.top_k]]


def cohort_summary(fn, values: np.ndarray, mask: np.ndarray,
                   bg_values: np.ndarray, bg_mask: np.ndarray,
                   feature_names: list[str],
                   config: ShapConfig | None = None) -> CohortShapSummary:
    """Per-sample attributions, ranked by mean |phi| for a beeswarm-style
    top-k summary."""
    config = config or ShapConfig()
    n = values.shape[0]
    if n < config.min_summary_samples:
        raise ExplainError(
            f"need at least {config.min_summary_samples} samples, got {n}")
    phis = np.empty((n, values.shape[1]))
    for i in range(n):
        # Sample-index-derived seeds keep results schedule-independent.
        res = shap_values(fn, values[i], mask[i], bg_values, bg_mask,
                          config, seed=config.seed * 1_000_003 + i)
        phis[i] = res.phi
    mean_abs = np.abs(phis).mean(axis=0)
    ranking = list(np.lexsort((np.arange(mean_abs.size), -mean_abs)))
    return CohortShapSummary(feature_names=list(feature_names), phi=phis,
                             feature_values=values, ranking=ranking,
                             top_k=config.top_k_summary)


@dataclass
class WaterfallItem:
    feature: str
    phi: float
    normalized_value: float | None  # None for the aggregated remainder


@dataclass
class Waterfall:
    base_value: float
    fx: float
    items: list[WaterfallItem]
    result: ShapResult = field(repr=False, default=None)


def waterfall(fn, values: np.ndarray, mask: np.ndarray,
              bg_values: np.ndarray, bg_mask: np.ndarray,
              feature_names: list[str],
              config: ShapConfig | None = None) -> Waterfall:
    """Top contributions for one sample, remainder aggregated. Requires the
    configured minimum number of observed markers."""
    config = config or ShapConfig()
    observed = int(np.asarray(mask).sum())
    if observed < config.min_waterfall_markers:
        raise ExplainError(
            f"waterfall requires >= {config.min_waterfall_markers} observed "
            f"markers, sample has {observed}")
    res = shap_values(fn, values, mask, bg_values, bg_mask, config)
    order = np.lexsort((np.arange(res.phi.size), -np.abs(res.phi)))
    top = order[:config.top_k_waterfall]
    rest = order[config.top_k_waterfall:]
    items = [WaterfallItem(feature=feature_names[i], phi=float(res.phi[i]),
                           normalized_value=float(values[i]))
             for i in top]
    if rest.size:
        items.append(WaterfallItem(
            feature=f"other ({rest.size} markers)",
            phi=float(res.phi[rest].sum()), normalized_value=None))
    return Waterfall(base_value=res.base_value, fx=res.fx, items=items,
                     result=res)
