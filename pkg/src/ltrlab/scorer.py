"""Bilinear yes/no-logit scorer and logit-delta reranking.

The relevance score of a (query, video) pair is the difference between
the yes and no logits; each logit is an independent bilinear head
q^T W v + b. This is the smallest parametric model that exposes two
genuine decision logits with closed-form gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .io import FeatureStore, RankedRun, RunEntry


@dataclass
class ScorerParams:
    """Parameters of the two bilinear heads."""

    dim: int
    W_yes: np.ndarray
    b_yes: float
    W_no: np.ndarray
    b_no: float

    def validate(self) -> None:
        for name, W in (("W_yes", self.W_yes), ("W_no", self.W_no)):
            if W.shape != (self.dim, self.dim):
                raise ValueError(f"{name} shape {W.shape} does not match dim {self.dim}")
            if not np.all(np.isfinite(W)):
                raise ValueError(f"{name} contains non-finite entries")
        if not (np.isfinite(self.b_yes) and np.isfinite(self.b_no)):
            raise ValueError("non-finite bias")

    def copy(self) -> "ScorerParams":
        return ScorerParams(self.dim, self.W_yes.copy(), self.b_yes, self.W_no.copy(), self.b_no)


@dataclass(frozen=True)
class ScoreRecord:
    query_id: str
    video_id: str
    logit_yes: float
    logit_no: float
    score: float


def init_params(dim: int, seed: int) -> ScorerParams:
    """Random zero-mean initialization with scale 1/sqrt(dim), deterministic by seed."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(dim)
    W_yes = rng.normal(0.0, scale, size=(dim, dim))
    b_yes = float(rng.normal(0.0, scale))
    W_no = rng.normal(0.0, scale, size=(dim, dim))
    b_no = float(rng.normal(0.0, scale))
    return ScorerParams(dim, W_yes, b_yes, W_no, b_no)


def score_block(params: ScorerParams, q: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Yes/no logits for one query vector against a block of video vectors."""
    ly = kernels.bilinear_logits(q, V, params.W_yes, params.b_yes)
    ln = kernels.bilinear_logits(q, V, params.W_no, params.b_no)
    if not (np.all(np.isfinite(ly)) and np.all(np.isfinite(ln))):
        raise ValueError("non-finite logit produced")
    return ly, ln


def score_pair(params: ScorerParams, q: np.ndarray, v: np.ndarray,
               query_id: str = "", video_id: str = "") -> ScoreRecord:
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if q.shape != (params.dim,) or v.shape != (params.dim,):
        raise ValueError(f"vector shapes {q.shape}/{v.shape} do not match dim {params.dim}")
    ly, ln = score_block(params, q, v[None, :])
    return ScoreRecord(query_id, video_id, float(ly[0]), float(ln[0]), float(ly[0] - ln[0]))


def score_candidates(params: ScorerParams, query_id: str, candidate_ids: list[str],
                     store: FeatureStore) -> list[ScoreRecord]:
    """Score all candidates of one query; output preserves input order."""
    q = store.query_vec(query_id)
    missing = [v for v in candidate_ids if v not in store.videos]
    if missing:
        raise KeyError(f"missing feature vectors for videos: {missing}")
    if not candidate_ids:
        return []
    V = np.stack([store.videos[v] for v in candidate_ids])
    ly, ln = score_block(params, q, V)
    return [
        ScoreRecord(query_id, vid, float(y), float(n), float(y - n))
        for vid, y, n in zip(candidate_ids, ly, ln)
    ]


def rerank(run: RankedRun, params: ScorerParams, store: FeatureStore, cutoff: int) -> RankedRun:
    """Reorder the top-cutoff candidates of each query by descending score.

    Candidates beyond the cutoff keep their original relative order after
    the reranked head. Ties in the head break by original first-stage rank.
    Output scores are the reranker scores for the head and the original
    first-stage scores for the tail, clamped downward where needed so the
    non-increasing-with-rank invariant holds; the clamp is idempotent.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    out_entries: list[RunEntry] = []
    for qid, ents in run.by_query().items():
        head = ents[:cutoff]
        tail = ents[cutoff:]
        if head:
            records = score_candidates(params, qid, [e.video_id for e in head], store)
            order = sorted(range(len(head)), key=lambda i: (-records[i].score, head[i].rank))
            new_scores = [records[i].score for i in order]
            new_head = [head[i] for i in order]
        else:
            new_scores, new_head = [], []
        scores = new_scores + [e.score for e in tail]
        videos = [e.video_id for e in new_head + tail]
        tags = [e.tag for e in new_head + tail]
        floor = np.inf
        for rank, (vid, score, tag) in enumerate(zip(videos, scores, tags), 1):
            score = min(score, floor)
            floor = score
            out_entries.append(RunEntry(qid, vid, rank, score, tag))
    result = RankedRun(out_entries)
    result.validate()
    return result


# checkpoint format: keyed header, then one %.17g value per line (row-major
# W_yes, b_yes, W_no, b_no); round-trips float64 exactly.

def save_params(params: ScorerParams, path: str) -> None:
    params.validate()
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"dim {params.dim}\n")
        for value in params.W_yes.ravel():
            f.write(f"{value:.17g}\n")
        f.write(f"{params.b_yes:.17g}\n")
        for value in params.W_no.ravel():
            f.write(f"{value:.17g}\n")
        f.write(f"{params.b_no:.17g}\n")


def load_params(path: str) -> ScorerParams:
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2 or header[0] != "dim":
            raise ValueError(f"{path}: bad checkpoint header")
        dim = int(header[1])
        values = [float(line) for line in f if line.strip()]
    expected = 2 * dim * dim + 2
    if len(values) != expected:
        raise ValueError(f"{path}: expected {expected} values, found {len(values)}")
    W_yes = np.array(values[: dim * dim]).reshape(dim, dim)
    b_yes = values[dim * dim]
    W_no = np.array(values[dim * dim + 1: 2 * dim * dim + 1]).reshape(dim, dim)
    b_no = values[-1]
    params = ScorerParams(dim, W_yes, b_yes, W_no, b_no)
    params.validate()
    return params
