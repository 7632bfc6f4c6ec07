"""Retrieval evaluation: Recall@K, nDCG@K, baseline deltas, binary metrics.

nDCG uses the graded-gain convention (2^rel - 1) / log2(i + 1); for
binary judgments this coincides with linear gain. Queries without any
relevant document are excluded from aggregate means and counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .io import Qrels, RankedRun


@dataclass
class MetricReport:
    cutoffs: list[int]
    recall: dict[int, float]
    ndcg: dict[int, float]
    per_query: dict[str, dict[str, dict[int, float]]]
    query_count: int
    skipped_queries: int


@dataclass
class DeltaReport:
    cutoffs: list[int]
    recall_delta_pct: dict[int, float | None]
    ndcg_delta_pct: dict[int, float | None]


def recall_at(run: RankedRun, qrels: Qrels, k: int) -> tuple[dict[str, float], float, int]:
    """Per-query and mean recall@k; returns (per_query, mean, skipped_count)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    per_query: dict[str, float] = {}
    skipped = 0
    for qid, ents in run.by_query().items():
        relevant = qrels.relevant(qid)
        if not relevant:
            skipped += 1
            continue
        top = {e.video_id for e in ents[:k]}
        per_query[qid] = len(relevant & top) / len(relevant)
    mean = sum(per_query.values()) / len(per_query) if per_query else 0.0
    return per_query, mean, skipped


def ndcg_at(run: RankedRun, qrels: Qrels, k: int) -> tuple[dict[str, float], float, int]:
    """Per-query and mean nDCG@k; returns (per_query, mean, skipped_count)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    per_query: dict[str, float] = {}
    skipped = 0
    for qid, ents in run.by_query().items():
        grades = [qrels.judgments.get((qid, e.video_id), 0) for e in ents]
        all_grades = [rel for (q, _v), rel in qrels.judgments.items() if q == qid]
        ideal = sorted((g for g in all_grades if g > 0), reverse=True)
        if not ideal:
            skipped += 1
            continue
        dcg = sum((2 ** g - 1) / math.log2(i + 2) for i, g in enumerate(grades[:k]))
        idcg = sum((2 ** g - 1) / math.log2(i + 2) for i, g in enumerate(ideal[:k]))
        per_query[qid] = dcg / idcg
    mean = sum(per_query.values()) / len(per_query) if per_query else 0.0
    return per_query, mean, skipped


def evaluate(run: RankedRun, qrels: Qrels, cutoffs: list[int]) -> MetricReport:
    if sorted(cutoffs) != list(cutoffs) or any(k < 1 for k in cutoffs):
        raise ValueError("cutoffs must be positive and ascending")
    recall: dict[int, float] = {}
    ndcg: dict[int, float] = {}
    per_query: dict[str, dict[str, dict[int, float]]] = {}
    skipped = 0
    count = 0
    for k in cutoffs:
        r_pq, r_mean, skipped = recall_at(run, qrels, k)
        n_pq, n_mean, _ = ndcg_at(run, qrels, k)
        recall[k] = r_mean
        ndcg[k] = n_mean
        count = len(r_pq)
        for qid in r_pq:
            per_query.setdefault(qid, {"recall": {}, "ndcg": {}})
            per_query[qid]["recall"][k] = r_pq[qid]
            per_query[qid]["ndcg"][k] = n_pq[qid]
    return MetricReport(list(cutoffs), recall, ndcg, per_query, count, skipped)


def delta_pct(baseline: float, method: float) -> float | None:
    """Percentage change relative to the baseline; None when baseline <= 0."""
    if baseline <= 0:
        return None
    return 100.0 * (method - baseline) / baseline


def delta_report(baseline: MetricReport, method: MetricReport) -> DeltaReport:
    if baseline.cutoffs != method.cutoffs:
        raise ValueError("cutoff mismatch between baseline and method reports")
    return DeltaReport(
        cutoffs=list(method.cutoffs),
        recall_delta_pct={k: delta_pct(baseline.recall[k], method.recall[k]) for k in method.cutoffs},
        ndcg_delta_pct={k: delta_pct(baseline.ndcg[k], method.ndcg[k]) for k in method.cutoffs},
    )


def binary_metrics(predictions: list[tuple[str, str, int]], qrels: Qrels) -> dict:
    """Accuracy, precision, and recall of the yes class over (q, v, 0/1) predictions."""
    tp = fp = tn = fn = 0
    for qid, vid, pred in predictions:
        if (qid, vid) not in qrels.judgments:
            raise KeyError(f"no qrels entry for ({qid}, {vid})")
        if pred not in (0, 1):
            raise ValueError(f"prediction must be 0 or 1, got {pred}")
        truth = 1 if qrels.judgments[(qid, vid)] > 0 else 0
        if pred == 1 and truth == 1:
            tp += 1
        elif pred == 1 and truth == 0:
            fp += 1
        elif pred == 0 and truth == 0:
            tn += 1
        else:
            fn += 1
    total = tp + fp + tn + fn
    return {
        "accuracy": (tp + tn) / total if total else None,
        "precision": tp / (tp + fp) if (tp + fp) else None,
        "recall": tp / (tp + fn) if (tp + fn) else None,
        "confusion": {"tp": tp, "fp": fp, "tn": tn, "fn": fn},
    }
