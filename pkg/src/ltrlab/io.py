"""Loading, validation, and persistence of all on-disk data.

Formats:
  run file     : `<query_id> Q0 <video_id> <rank> <score> <tag>` (whitespace)
  qrels file   : `<query_id> 0 <video_id> <relevance>`
  feature file : one JSON object per line: {"id", "kind", "vector"}
  teacher file : one JSON object per line:
                 {"query_id", "video_id", "label", "margin", "p_yes"}
  caption file : one JSON object per line: {"video_id", "token_logprobs"}

All loaders validate structural invariants on every load and report the
offending line number on failure. Returned containers are treated as
immutable after load.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


class DataFormatError(ValueError):
    """A file violates its format or a structural invariant."""


@dataclass(frozen=True)
class RunEntry:
    query_id: str
    video_id: str
    rank: int
    score: float
    tag: str


@dataclass
class RankedRun:
    """Per-query ordered candidate lists with scores (higher is better)."""

    entries: list[RunEntry] = field(default_factory=list)

    def by_query(self) -> dict[str, list[RunEntry]]:
        out: dict[str, list[RunEntry]] = {}
        for e in self.entries:
            out.setdefault(e.query_id, []).append(e)
        for q in out:
            out[q].sort(key=lambda e: e.rank)
        return out

    def query_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.setdefault(e.query_id, None)
        return list(seen)

    def validate(self) -> None:
        seen_pairs = set()
        for e in self.entries:
            key = (e.query_id, e.video_id)
            if key in seen_pairs:
                raise DataFormatError(f"duplicate (query, video) pair {key}")
            seen_pairs.add(key)
        for qid, ents in self.by_query().items():
            ranks = [e.rank for e in ents]
            if ranks != list(range(1, len(ents) + 1)):
                raise DataFormatError(f"query {qid}: ranks are not contiguous 1..N (rank gap or duplicate)")
            scores = [e.score for e in ents]
            for a, b in zip(scores, scores[1:]):
                if b > a:
                    raise DataFormatError(f"query {qid}: scores increase with rank ({a} -> {b})")


@dataclass
class Qrels:
    """Relevance judgments: (query_id, video_id) -> non-negative grade."""

    judgments: dict[tuple[str, str], int] = field(default_factory=dict)

    def relevant(self, query_id: str) -> set[str]:
        return {v for (q, v), rel in self.judgments.items() if q == query_id and rel > 0}

    def queries(self) -> list[str]:
        seen: dict[str, None] = {}
        for (q, _v) in self.judgments:
            seen.setdefault(q, None)
        return list(seen)

    def positive(self, query_id: str) -> str | None:
        """The labeled positive v*: highest grade, ties broken lexicographically."""
        best: tuple[int, str] | None = None
        for (q, v), rel in self.judgments.items():
            if q != query_id or rel <= 0:
                continue
            cand = (-rel, v)
            if best is None or cand < best:
                best = cand
        return None if best is None else best[1]


@dataclass(frozen=True)
class TeacherJudgment:
    """Teacher binary judgment, yes-minus-no logit margin, and yes probability."""

    query_id: str
    video_id: str
    label_yhat: int
    margin_delta: float
    p_yes: float


@dataclass(frozen=True)
class CaptionSample:
    """Per-token log-probabilities of a teacher caption under the model."""

    video_id: str
    token_logprobs: tuple[float, ...]


def load_run(path: str) -> RankedRun:
    entries = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise DataFormatError(f"{path}:{lineno}: expected 6 columns, got {len(parts)}")
            qid, _q0, vid, rank_s, score_s, tag = parts
            try:
                rank = int(rank_s)
                score = float(score_s)
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad rank/score: {exc}") from None
            if rank < 1:
                raise DataFormatError(f"{path}:{lineno}: rank must be positive")
            if not math.isfinite(score):
                raise DataFormatError(f"{path}:{lineno}: non-finite score")
            entries.append(RunEntry(qid, vid, rank, score, tag))
    run = RankedRun(entries)
    run.validate()
    # canonical order: per-query by rank
    ordered = []
    for qid, ents in run.by_query().items():
        ordered.extend(ents)
    return RankedRun(ordered)


def write_run(run: RankedRun, path: str, tag: str | None = None) -> None:
    """Write a run file; scores rendered at fixed 6-decimal precision."""
    run.validate()
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for qid, ents in run.by_query().items():
            for e in ents:
                f.write(f"{e.query_id} Q0 {e.video_id} {e.rank} {e.score:.6f} {tag or e.tag}\n")


def load_qrels(path: str) -> tuple[Qrels, list[str]]:
    """Load qrels; also return the queries lacking any positive judgment."""
    judgments: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise DataFormatError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
            qid, _iter, vid, rel_s = parts
            try:
                rel = int(rel_s)
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: bad relevance {rel_s!r}") from None
            if rel < 0:
                raise DataFormatError(f"{path}:{lineno}: negative relevance")
            key = (qid, vid)
            if key in judgments and judgments[key] != rel:
                raise DataFormatError(f"{path}:{lineno}: conflicting duplicate for {key}")
            judgments[key] = rel
    qrels = Qrels(judgments)
    positive_free = sorted(q for q in qrels.queries() if not qrels.relevant(q))
    return qrels, positive_free


def write_qrels(qrels: Qrels, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for (qid, vid), rel in qrels.judgments.items():
            f.write(f"{qid} 0 {vid} {rel}\n")


class FeatureStore:
    """Dense float64 vectors for queries and videos, all of one dimension."""

    def __init__(self, dim: int, queries: dict[str, np.ndarray], videos: dict[str, np.ndarray]):
        self.dim = dim
        self.queries = queries
        self.videos = videos

    def query_vec(self, query_id: str) -> np.ndarray:
        try:
            return self.queries[query_id]
        except KeyError:
            raise KeyError(f"no feature vector for query {query_id!r}") from None

    def video_vec(self, video_id: str) -> np.ndarray:
        try:
            return self.videos[video_id]
        except KeyError:
            raise KeyError(f"no feature vector for video {video_id!r}") from None


def load_features(path: str) -> FeatureStore:
    queries: dict[str, np.ndarray] = {}
    videos: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                ident = rec["id"]
                kind = rec["kind"]
                vec = np.asarray(rec["vector"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"{path}:{lineno}: bad feature record: {exc}") from None
            if vec.ndim != 1 or vec.size == 0:
                raise DataFormatError(f"{path}:{lineno}: vector must be a non-empty flat list")
            if not np.all(np.isfinite(vec)):
                raise DataFormatError(f"{path}:{lineno}: non-finite component in vector")
            if dim is None:
                dim = int(vec.size)
            elif vec.size != dim:
                raise DataFormatError(f"{path}:{lineno}: dimension mismatch ({vec.size} != {dim})")
            if kind == "query":
                queries[ident] = vec
            elif kind == "video":
                videos[ident] = vec
            else:
                raise DataFormatError(f"{path}:{lineno}: unknown kind {kind!r}")
    if dim is None:
        raise DataFormatError(f"{path}: empty feature file")
    return FeatureStore(dim, queries, videos)


def write_features(store: FeatureStore, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for ident, vec in store.queries.items():
            f.write(json.dumps({"id": ident, "kind": "query", "vector": list(vec)}) + "\n")
        for ident, vec in store.videos.items():
            f.write(json.dumps({"id": ident, "kind": "video", "vector": list(vec)}) + "\n")


def load_teacher(path: str) -> list[TeacherJudgment]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                j = TeacherJudgment(
                    query_id=rec["query_id"],
                    video_id=rec["video_id"],
                    label_yhat=int(rec["label"]),
                    margin_delta=float(rec["margin"]),
                    p_yes=float(rec["p_yes"]),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"{path}:{lineno}: bad teacher record: {exc}") from None
            if j.label_yhat not in (0, 1):
                raise DataFormatError(f"{path}:{lineno}: label must be 0 or 1, got {j.label_yhat}")
            if not (0.0 <= j.p_yes <= 1.0):
                raise DataFormatError(f"{path}:{lineno}: p_yes outside [0,1]: {j.p_yes}")
            if not math.isfinite(j.margin_delta):
                raise DataFormatError(f"{path}:{lineno}: non-finite margin")
            out.append(j)
    return out


def write_teacher(judgments: list[TeacherJudgment], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for j in judgments:
            f.write(json.dumps({
                "query_id": j.query_id, "video_id": j.video_id,
                "label": j.label_yhat, "margin": j.margin_delta, "p_yes": j.p_yes,
            }) + "\n")


def teacher_lookup(judgments: list[TeacherJudgment]) -> dict[tuple[str, str], TeacherJudgment]:
    return {(j.query_id, j.video_id): j for j in judgments}


def load_captions(path: str) -> list[CaptionSample]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                sample = CaptionSample(rec["video_id"], tuple(float(x) for x in rec["token_logprobs"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"{path}:{lineno}: bad caption record: {exc}") from None
            if not sample.token_logprobs:
                raise DataFormatError(f"{path}:{lineno}: empty token sequence")
            if any(lp > 0.0 for lp in sample.token_logprobs):
                raise DataFormatError(f"{path}:{lineno}: positive token log-probability")
            out.append(sample)
    return out
