"""Score-distribution diagnostics: ECDF separation and variance decomposition.

separation_stats quantifies how far apart the relevant and non-relevant
score distributions sit: mean gap, AUC (probability a random relevant
score beats a random non-relevant one, ties counting half), and overlap
defined as one minus the two-sample Kolmogorov-Smirnov statistic.

variance_decomposition measures query/video prior strength: R^2 of the
query-mean, video-mean, and additive (mu_q + mu_v - mu) predictors of
the pairwise score table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

# above this pos*neg product, AUC switches from exact pair counting to the
# rank-sum formula (identical up to rounding, O(n log n))
_PAIR_COUNT_LIMIT = 10_000


@dataclass
class EcdfCurve:
    values: np.ndarray       # unique sorted sample values
    probabilities: np.ndarray  # cumulative fractions, ending at exactly 1.0


@dataclass
class DecompositionReport:
    r2_query_only: float | None
    r2_video_only: float | None
    r2_additive: float | None
    global_mean: float
    pair_count: int


def ecdf(scores) -> EcdfCurve:
    """Right-continuous empirical CDF evaluated at the sample points."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("empty sample")
    values, counts = np.unique(scores, return_counts=True)
    probs = np.cumsum(counts) / scores.size
    probs[-1] = 1.0
    return EcdfCurve(values, probs)


def _auc(pos: np.ndarray, neg: np.ndarray) -> float:
    if pos.size * neg.size <= _PAIR_COUNT_LIMIT:
        return float(kernels.auc_pair_count(pos, neg))
    # Mann-Whitney rank-sum with midranks for ties
    combined = np.concatenate([pos, neg])
    order = np.argsort(combined, kind="mergesort")
    ranks = np.empty(combined.size)
    sorted_vals = combined[order]
    i = 0
    while i < combined.size:
        j = i
        while j + 1 < combined.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    r_pos = ranks[: pos.size].sum()
    u = r_pos - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


def _ks_statistic(a: np.ndarray, b: np.ndarray) -> float:
    grid = np.union1d(a, b)
    fa = np.searchsorted(np.sort(a), grid, side="right") / a.size
    fb = np.searchsorted(np.sort(b), grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def separation_stats(relevant_scores, nonrelevant_scores) -> dict:
    rel = np.asarray(relevant_scores, dtype=np.float64)
    non = np.asarray(nonrelevant_scores, dtype=np.float64)
    if rel.size == 0 or non.size == 0:
        raise ValueError("both score classes must be non-empty")
    return {
        "mean_gap": float(rel.mean() - non.mean()),
        "auc": _auc(rel, non),
        "overlap": 1.0 - _ks_statistic(rel, non),
    }


def variance_decomposition(scores: list[tuple[str, str, float]]) -> DecompositionReport:
    """R^2 of the query-only, video-only, and additive mean predictors."""
    if len(scores) < 2:
        raise ValueError("need at least 2 (query, video, score) rows")
    s = np.array([row[2] for row in scores], dtype=np.float64)
    mu = float(s.mean())

    q_sums: dict[str, list[float]] = {}
    v_sums: dict[str, list[float]] = {}
    for qid, vid, val in scores:
        q_sums.setdefault(qid, []).append(val)
        v_sums.setdefault(vid, []).append(val)
    mu_q = {q: float(np.mean(vals)) for q, vals in q_sums.items()}
    mu_v = {v: float(np.mean(vals)) for v, vals in v_sums.items()}

    ss_tot = float(((s - mu) ** 2).sum())
    if ss_tot == 0.0:
        return DecompositionReport(None, None, None, mu, len(scores))

    def r2(predict) -> float:
        res = sum((val - predict(qid, vid)) ** 2 for qid, vid, val in scores)
        return 1.0 - res / ss_tot

    return DecompositionReport(
        r2_query_only=r2(lambda q, v: mu_q[q]),
        r2_video_only=r2(lambda q, v: mu_v[v]),
        r2_additive=r2(lambda q, v: mu_q[q] + mu_v[v] - mu),
        global_mean=mu,
        pair_count=len(scores),
    )
