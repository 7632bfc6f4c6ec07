"""Ranking losses and their analytic gradients.

The composite group objective combines three terms over a query group of
candidate scores s_i = logit_yes - logit_no:

  pairwise    : -log softmax(s/tau_pair) at the positive
  teacher     : BCE-with-logits(s/tau_teacher, teacher p_yes), averaged
  pointwise   : weighted BCE-with-logits(s/tau_point, softened target),
                averaged; label 1 -> (target 1.0, weight 1.0),
                label 0 -> (target 0.1, weight 0.5)

  total = enable_pair * L_pair
        + lambda_teacher * enable_teacher * mean(L_teacher)
        + lambda_point * enable_point * mean(L_point)

All BCE terms are computed in the softplus-based logit form to avoid
catastrophic cancellation for large |score|/tau.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .io import CaptionSample, FeatureStore
from .scorer import ScorerParams, score_block

log = logging.getLogger(__name__)


@dataclass
class ObjectiveConfig:
    tau_pair: float = 10.0
    tau_teacher: float = 1.0
    tau_point: float = 1.0
    lambda_teacher: float = 5.0
    lambda_point: float = 0.5
    soft_negative_target: float = 0.1
    negative_weight: float = 0.5
    enable_pair: bool = True
    enable_teacher: bool = True
    enable_point: bool = True

    def validate(self) -> None:
        if self.tau_pair <= 0 or self.tau_teacher <= 0 or self.tau_point <= 0:
            raise ValueError("temperatures must be strictly positive")
        if self.lambda_teacher < 0 or self.lambda_point < 0:
            raise ValueError("loss weights must be non-negative")
        if not (0.0 <= self.soft_negative_target < 1.0):
            raise ValueError("soft_negative_target must be in [0, 1)")
        if self.negative_weight <= 0:
            raise ValueError("negative_weight must be positive")


@dataclass
class GroupLossBreakdown:
    l_pair: float
    l_teacher: float
    l_point: float
    total: float
    score_grads: np.ndarray


@dataclass
class ParamGrads:
    """Gradient container shaped like ScorerParams."""

    dW_yes: np.ndarray
    db_yes: float
    dW_no: np.ndarray
    db_no: float


def caption_nll(sample: CaptionSample) -> float:
    """Negative log-likelihood of a caption from per-token log-probabilities."""
    if not sample.token_logprobs:
        raise ValueError("empty token sequence")
    if any(lp > 0.0 for lp in sample.token_logprobs):
        raise ValueError("positive token log-probability")
    return -float(sum(sample.token_logprobs))


def group_softmax(scores: np.ndarray, tau_pair: float) -> np.ndarray:
    """Temperature softmax over a candidate group, max-subtracted for stability."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("empty score vector")
    if not np.all(np.isfinite(scores)):
        raise ValueError("non-finite score")
    z = scores / tau_pair
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def pairwise_loss(scores: np.ndarray, positive_index: int, tau_pair: float) -> tuple[float, np.ndarray]:
    """-log p_positive under the group softmax, with gradient wrt scores."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size < 2:
        raise ValueError("pairwise loss undefined for single-candidate groups")
    if not (0 <= positive_index < scores.size):
        raise IndexError(f"positive_index {positive_index} out of range")
    p = group_softmax(scores, tau_pair)
    loss = -math.log(p[positive_index])
    grad = p.copy()
    grad[positive_index] -= 1.0
    grad /= tau_pair
    return loss, grad


def _bce_with_logits(z: float, target: float) -> tuple[float, float]:
    """Stable BCE on logit z toward target in [0,1]; returns (loss, dloss/dz)."""
    # softplus(z) - target*z, with softplus in the cancellation-free form
    loss = max(z, 0.0) - target * z + math.log1p(math.exp(-abs(z)))
    sig = 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))
    return loss, sig - target


def teacher_loss(score: float, p_yes_teacher: float, tau_teacher: float) -> tuple[float, float]:
    """Temperature-scaled BCE of score/tau toward the teacher yes-probability."""
    if not (0.0 <= p_yes_teacher <= 1.0):
        raise ValueError(f"teacher target outside [0,1]: {p_yes_teacher}")
    loss, dz = _bce_with_logits(score / tau_teacher, p_yes_teacher)
    return loss, dz / tau_teacher


def pointwise_loss(score: float, label: int, config: ObjectiveConfig) -> tuple[float, float]:
    """Weighted calibration BCE with a softened target for negatives."""
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    if label == 1:
        target, weight = 1.0, 1.0
    else:
        target, weight = config.soft_negative_target, config.negative_weight
    loss, dz = _bce_with_logits(score / config.tau_point, target)
    return weight * loss, weight * dz / config.tau_point


def group_loss(scores: np.ndarray, positive_index: int, teacher_probs: np.ndarray,
               labels: np.ndarray, config: ObjectiveConfig) -> GroupLossBreakdown:
    """Composite loss over one query group and its per-candidate score gradient."""
    config.validate()
    scores = np.asarray(scores, dtype=np.float64)
    teacher_probs = np.asarray(teacher_probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = scores.size
    if teacher_probs.size != n or labels.size != n:
        raise ValueError("scores, teacher_probs, and labels must have equal length")
    if labels.sum() != 1 or labels[positive_index] != 1:
        raise ValueError("labels must contain exactly one 1, at positive_index")

    grads = np.zeros(n)
    l_pair = 0.0
    if config.enable_pair:
        if n >= 2:
            l_pair, g = pairwise_loss(scores, positive_index, config.tau_pair)
            grads += g
        else:
            log.warning("single-candidate group: pairwise term skipped")

    l_teacher = 0.0
    if config.enable_teacher:
        for i in range(n):
            li, gi = teacher_loss(float(scores[i]), float(teacher_probs[i]), config.tau_teacher)
            l_teacher += li / n
            grads[i] += config.lambda_teacher * gi / n

    l_point = 0.0
    if config.enable_point:
        for i in range(n):
            li, gi = pointwise_loss(float(scores[i]), int(labels[i]), config)
            l_point += li / n
            grads[i] += config.lambda_point * gi / n

    total = l_pair + config.lambda_teacher * l_teacher + config.lambda_point * l_point
    return GroupLossBreakdown(l_pair, l_teacher, l_point, total, grads)


def group_scores(group, params: ScorerParams, store: FeatureStore) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Score a TrainingGroup; returns (q, V, scores) with the positive first."""
    q = store.query_vec(group.query_id)
    ids = [group.positive_id] + list(group.negative_ids)
    missing = [v for v in ids if v not in store.videos]
    if missing:
        raise KeyError(f"missing feature vectors for videos: {missing}")
    V = np.stack([store.videos[v] for v in ids])
    ly, ln = score_block(params, q, V)
    return q, V, ly - ln


def param_gradients(group, params: ScorerParams, store: FeatureStore,
                    config: ObjectiveConfig) -> tuple[ParamGrads, GroupLossBreakdown]:
    """Chain-rule gradients of the group loss through the bilinear scorer."""
    q, V, scores = group_scores(group, params, store)
    breakdown = group_loss(scores, 0, np.asarray(group.teacher_probs),
                           np.asarray(group.labels), config)
    g = breakdown.score_grads
    dW = kernels.grad_outer(q, V, g)
    db = float(g.sum())
    return ParamGrads(dW, db, -dW, -db), breakdown
