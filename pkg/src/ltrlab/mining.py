"""Teacher-guided candidate partitioning, group assembly, and query filtering.

Non-positive candidates are split by the teacher's judgment and logit
margin into trusted negatives (confident no), suspected positives
(yes above the drop threshold; removed from training entirely), and
hard negatives (everything else, retained because they dominate
reranking errors). Training groups hold one positive plus up to K mined
negatives, preferring hard negatives while reserving one trusted
negative per query when available.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .io import DataFormatError, Qrels, RankedRun, TeacherJudgment


@dataclass
class MiningConfig:
    alpha1: float = -6.0
    alpha2: float = -8.0
    negatives_per_query: int = 2
    require_trusted: bool = True
    positive_score_ratio: float = 2.0
    first_stage_depth: int = 1000

    def validate(self) -> None:
        if self.negatives_per_query < 1:
            raise ValueError("negatives_per_query must be >= 1")
        if self.positive_score_ratio <= 0:
            raise ValueError("positive_score_ratio must be positive")
        if self.first_stage_depth < 1:
            raise ValueError("first_stage_depth must be >= 1")


@dataclass
class Partition:
    query_id: str
    trusted_negatives: list[str] = field(default_factory=list)
    suspected_positives: list[str] = field(default_factory=list)
    hard_negatives: list[str] = field(default_factory=list)


@dataclass
class TrainingGroup:
    query_id: str
    positive_id: str
    negative_ids: list[str]
    teacher_probs: list[float]   # aligned to [positive] + negatives
    labels: list[int]            # aligned; exactly one 1, at the positive

    def size(self) -> int:
        return 1 + len(self.negative_ids)


JudgmentLookup = dict[tuple[str, str], TeacherJudgment]


def partition_candidates(query_id: str, candidate_ids: list[str], qrels: Qrels,
                         judgments: JudgmentLookup, config: MiningConfig) -> Partition:
    """Split the non-positive candidates of one query into the three classes.

    trusted   : yhat = 0 and margin <= alpha1
    suspected : yhat = 1 and margin >  alpha2  (dropped from training)
    hard      : the remainder
    """
    part = Partition(query_id)
    for vid in candidate_ids:
        if qrels.judgments.get((query_id, vid), 0) > 0:
            continue
        j = judgments.get((query_id, vid))
        if j is None:
            raise KeyError(f"missing teacher judgment for ({query_id}, {vid})")
        if j.label_yhat == 0 and j.margin_delta <= config.alpha1:
            part.trusted_negatives.append(vid)
        elif j.label_yhat == 1 and j.margin_delta > config.alpha2:
            part.suspected_positives.append(vid)
        else:
            part.hard_negatives.append(vid)
    return part


def _query_rng(seed: int, query_id: str) -> np.random.Generator:
    # per-query stream: stable under reordering of the query set
    return np.random.default_rng([seed, zlib.crc32(query_id.encode("utf-8"))])


def _select_negatives(part: Partition, config: MiningConfig,
                      rng: np.random.Generator) -> list[str]:
    """Pick up to K negatives: hard first, with one trusted slot reserved
    when require_trusted holds and a trusted negative exists."""
    k = config.negatives_per_query
    hard = sorted(part.hard_negatives)
    trusted = sorted(part.trusted_negatives)
    rng.shuffle(hard)
    rng.shuffle(trusted)
    chosen: list[str] = []
    if config.require_trusted and trusted:
        chosen.append(trusted.pop(0))
    for pool in (hard, trusted):
        while pool and len(chosen) < k:
            chosen.append(pool.pop(0))
    return chosen[:k]


def assemble_groups(run: RankedRun, qrels: Qrels, judgments: JudgmentLookup,
                    config: MiningConfig, seed: int) -> tuple[list[TrainingGroup], dict[str, str]]:
    """Build one training group per query that has a usable positive.

    Returns (groups, skipped) where skipped maps query_id -> reason.
    Suspected positives never enter a group. Queries are processed in
    canonical (sorted) id order; selection randomness is a per-query
    stream derived from the seed, so results are deterministic.
    """
    config.validate()
    by_query = run.by_query()
    groups: list[TrainingGroup] = []
    skipped: dict[str, str] = {}
    for qid in sorted(by_query):
        positive = qrels.positive(qid)
        if positive is None:
            skipped[qid] = "no positive judgment in qrels"
            continue
        candidates = [e.video_id for e in by_query[qid]]
        if positive not in candidates:
            skipped[qid] = "positive missing from candidate pool"
            continue
        part = partition_candidates(qid, candidates, qrels, judgments, config)
        negatives = _select_negatives(part, config, _query_rng(seed, qid))
        probs = [judgments[(qid, positive)].p_yes if (qid, positive) in judgments else 1.0]
        probs += [judgments[(qid, v)].p_yes for v in negatives]
        labels = [1] + [0] * len(negatives)
        groups.append(TrainingGroup(qid, positive, negatives, probs, labels))
    return groups, skipped


def filter_queries(run: RankedRun, qrels: Qrels, judgments: JudgmentLookup,
                   config: MiningConfig) -> tuple[list[str], dict[str, str]]:
    """Keep only queries passing the three quality rules.

    Rejection rules, checked in order; the report names the first trigger:
      (a) the positive is not within the first first_stage_depth candidates
      (b) the top-ranked non-positive first-stage score exceeds
          positive_score_ratio x the positive's first-stage score
      (c) the teacher judges the positive non-relevant

    Rule (b) requires a positive first-stage score for the positive;
    otherwise the ratio is undefined and the rule is skipped with a warning.
    """
    config.validate()
    by_query = run.by_query()
    kept: list[str] = []
    report: dict[str, str] = {}
    for qid in sorted(by_query):
        positive = qrels.positive(qid)
        if positive is None:
            report[qid] = "no-positive: query has no positive judgment"
            continue
        ents = by_query[qid]
        pos_entry = next((e for e in ents[: config.first_stage_depth] if e.video_id == positive), None)
        if pos_entry is None:
            report[qid] = f"rule-a: positive not within first {config.first_stage_depth} candidates"
            continue
        top_neg = next((e for e in ents if qrels.judgments.get((qid, e.video_id), 0) <= 0), None)
        if top_neg is not None and pos_entry.score > 0:
            if top_neg.score > config.positive_score_ratio * pos_entry.score:
                report[qid] = (f"rule-b: top negative score {top_neg.score:g} exceeds "
                               f"{config.positive_score_ratio:g}x positive score {pos_entry.score:g}")
                continue
        elif top_neg is not None and pos_entry.score <= 0:
            report[qid] = "warn-b: non-positive first-stage score, ratio rule skipped"
        j = judgments.get((qid, positive))
        if j is None:
            raise KeyError(f"missing teacher judgment for positive ({qid}, {positive})")
        if j.label_yhat == 0:
            report[qid] = "rule-c: teacher judges the positive non-relevant"
            continue
        kept.append(qid)
    return kept, report


def dataset_summary(groups: list[TrainingGroup]) -> dict:
    """Exact counts over assembled groups."""
    total = sum(g.size() for g in groups)
    negatives = sum(len(g.negative_ids) for g in groups)
    hist: dict[int, int] = {}
    for g in groups:
        hist[len(g.negative_ids)] = hist.get(len(g.negative_ids), 0) + 1
    return {
        "total_records": total,
        "positive_pairs": len(groups),
        "negative_pairs": negatives,
        "negatives_per_query_histogram": dict(sorted(hist.items())),
        "mean_candidates_per_query": (total / len(groups)) if groups else 0.0,
    }


def write_groups(groups: list[TrainingGroup], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for g in groups:
            f.write(json.dumps({
                "query_id": g.query_id, "positive_id": g.positive_id,
                "negative_ids": g.negative_ids, "teacher_probs": g.teacher_probs,
                "labels": g.labels,
            }) + "\n")


def load_groups(path: str) -> list[TrainingGroup]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                g = TrainingGroup(rec["query_id"], rec["positive_id"],
                                  list(rec["negative_ids"]),
                                  [float(p) for p in rec["teacher_probs"]],
                                  [int(x) for x in rec["labels"]])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"{path}:{lineno}: bad group record: {exc}") from None
            if len(g.teacher_probs) != g.size() or len(g.labels) != g.size():
                raise DataFormatError(f"{path}:{lineno}: misaligned group vectors")
            if g.labels[0] != 1 or sum(g.labels) != 1:
                raise DataFormatError(f"{path}:{lineno}: labels must be one-hot at the positive")
            if g.positive_id in g.negative_ids:
                raise DataFormatError(f"{path}:{lineno}: positive repeated among negatives")
            out.append(g)
    return out
