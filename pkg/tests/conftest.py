"""Shared synthetic fixtures for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from ltrlab.io import FeatureStore, Qrels, RankedRun, RunEntry, TeacherJudgment
from ltrlab.mining import TrainingGroup


def make_run(per_query: dict[str, list[tuple[str, float]]], tag: str = "t") -> RankedRun:
    """Build a RankedRun from {qid: [(vid, score), ...]} sorted by score desc."""
    entries = []
    for qid, pairs in per_query.items():
        ordered = sorted(pairs, key=lambda p: -p[1])
        for rank, (vid, score) in enumerate(ordered, 1):
            entries.append(RunEntry(qid, vid, rank, score, tag))
    run = RankedRun(entries)
    run.validate()
    return run


def make_separable_fixture(dim: int = 8, n_queries: int = 200, n_neg: int = 2,
                           seed: int = 0):
    """Linearly separable toy retrieval data.

    Positive videos are small perturbations of their query vector; negatives
    are independent random directions. Returns (store, qrels, groups, run)
    where run ranks each query's pool by the clean dot-product signal plus
    noise (standing in for a first-stage retriever).
    """
    rng = np.random.default_rng(seed)
    queries: dict[str, np.ndarray] = {}
    videos: dict[str, np.ndarray] = {}
    judgments: dict[tuple[str, str], int] = {}
    groups: list[TrainingGroup] = []
    run_pairs: dict[str, list[tuple[str, float]]] = {}

    for i in range(n_queries):
        qid = f"q{i:03d}"
        q = rng.normal(size=dim)
        q /= np.linalg.norm(q)
        queries[qid] = q
        pos = f"{qid}_pos"
        v = q + 0.15 * rng.normal(size=dim)
        videos[pos] = v / np.linalg.norm(v)
        judgments[(qid, pos)] = 1
        negs = []
        for j in range(n_neg):
            nid = f"{qid}_neg{j}"
            v = rng.normal(size=dim)
            videos[nid] = v / np.linalg.norm(v)
            judgments[(qid, nid)] = 0
            negs.append(nid)
        probs = [0.95] + [0.05] * n_neg
        groups.append(TrainingGroup(qid, pos, negs, probs, [1] + [0] * n_neg))
        pool = [pos] + negs
        scores = {vid: float(q @ videos[vid]) + 0.05 * rng.normal() for vid in pool}
        run_pairs[qid] = [(vid, scores[vid]) for vid in pool]

    store = FeatureStore(dim, queries, videos)
    qrels = Qrels(judgments)
    return store, qrels, groups, make_run(run_pairs)


@pytest.fixture
def separable_small():
    return make_separable_fixture(dim=8, n_queries=40, n_neg=2, seed=7)


def teacher_records(qrels: Qrels, groups: list[TrainingGroup]) -> list[TeacherJudgment]:
    """Teacher file matching the separable fixture: confident and correct."""
    out = []
    for g in groups:
        out.append(TeacherJudgment(g.query_id, g.positive_id, 1, 6.0, 0.95))
        for j, nid in enumerate(g.negative_ids):
            # alternate trusted (strong negative margin) and hard negatives
            margin = -7.0 if j % 2 == 0 else -3.0
            out.append(TeacherJudgment(g.query_id, nid, 0, margin, 0.05))
    return out
