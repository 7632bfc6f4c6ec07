"""Query-grouped AdamW training loop with linear warmup + cosine decay.

One optimizer step consumes groups_per_step query groups (gradient
accumulation by summation). Weight decay is decoupled: parameters are
multiplied by (1 - lr * wd) before the moment-based update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .io import FeatureStore
from .mining import TrainingGroup
from .objectives import (GroupLossBreakdown, ObjectiveConfig, ParamGrads, group_loss,
                         group_scores, param_gradients)
from .scorer import ScorerParams, init_params


@dataclass
class TrainerConfig:
    base_lr: float = 1e-5
    warmup_proportion: float = 0.03
    epochs: int = 2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    groups_per_step: int = 1
    seed: int = 0

    def validate(self) -> None:
        if self.base_lr <= 0:
            raise ValueError("base_lr must be positive")
        if not (0.0 <= self.warmup_proportion < 1.0):
            raise ValueError("warmup_proportion must be in [0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.groups_per_step < 1:
            raise ValueError("groups_per_step must be >= 1")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


@dataclass
class TrainState:
    params: ScorerParams
    step: int = 0
    m_W_yes: np.ndarray = None
    m_b_yes: float = 0.0
    m_W_no: np.ndarray = None
    m_b_no: float = 0.0
    v_W_yes: np.ndarray = None
    v_b_yes: float = 0.0
    v_W_no: np.ndarray = None
    v_b_no: float = 0.0
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        dim = self.params.dim
        for name in ("m_W_yes", "m_W_no", "v_W_yes", "v_W_no"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros((dim, dim)))


def lr_at(step: int, total_steps: int, config: TrainerConfig) -> float:
    """Linear warmup to base_lr over ceil(warmup_proportion * total), then cosine to 0."""
    if total_steps < 1:
        raise ValueError("total_steps must be >= 1")
    if not (0 <= step <= total_steps):
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warmup = math.ceil(config.warmup_proportion * total_steps)
    if step < warmup:
        return config.base_lr * (step + 1) / warmup
    span = max(total_steps - warmup, 1)
    return config.base_lr * 0.5 * (1.0 + math.cos(math.pi * (step - warmup) / span))


def _adamw_update(state: TrainState, grads, lr: float, cfg: TrainerConfig) -> None:
    b1, b2, eps = cfg.beta1, cfg.beta2, cfg.eps
    t = state.step + 1
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    p = state.params

    # decoupled weight decay first, then moment-based update
    decay = 1.0 - lr * cfg.weight_decay
    p.W_yes *= decay
    p.W_no *= decay
    p.b_yes *= decay
    p.b_no *= decay

    state.m_W_yes = b1 * state.m_W_yes + (1 - b1) * grads.dW_yes
    state.v_W_yes = b2 * state.v_W_yes + (1 - b2) * grads.dW_yes ** 2
    p.W_yes -= lr * (state.m_W_yes / c1) / (np.sqrt(state.v_W_yes / c2) + eps)

    state.m_W_no = b1 * state.m_W_no + (1 - b1) * grads.dW_no
    state.v_W_no = b2 * state.v_W_no + (1 - b2) * grads.dW_no ** 2
    p.W_no -= lr * (state.m_W_no / c1) / (np.sqrt(state.v_W_no / c2) + eps)

    state.m_b_yes = b1 * state.m_b_yes + (1 - b1) * grads.db_yes
    state.v_b_yes = b2 * state.v_b_yes + (1 - b2) * grads.db_yes ** 2
    p.b_yes -= lr * (state.m_b_yes / c1) / (math.sqrt(state.v_b_yes / c2) + eps)

    state.m_b_no = b1 * state.m_b_no + (1 - b1) * grads.db_no
    state.v_b_no = b2 * state.v_b_no + (1 - b2) * grads.db_no ** 2
    p.b_no -= lr * (state.m_b_no / c1) / (math.sqrt(state.v_b_no / c2) + eps)

    state.step += 1


def train_step(state: TrainState, batch: list[TrainingGroup], store: FeatureStore,
               obj_cfg: ObjectiveConfig, tr_cfg: TrainerConfig,
               total_steps: int) -> GroupLossBreakdown:
    """One AdamW step over a batch of query groups (gradients summed)."""
    if not batch:
        raise ValueError("empty batch")
    dim = state.params.dim
    acc_dW_yes = np.zeros((dim, dim))
    acc_dW_no = np.zeros((dim, dim))
    acc_db_yes = 0.0
    acc_db_no = 0.0
    l_pair = l_teacher = l_point = total = 0.0
    for group in batch:
        grads, bd = param_gradients(group, state.params, store, obj_cfg)
        if not math.isfinite(bd.total):
            raise FloatingPointError(f"non-finite loss for query {group.query_id}: {bd.total}")
        acc_dW_yes += grads.dW_yes
        acc_dW_no += grads.dW_no
        acc_db_yes += grads.db_yes
        acc_db_no += grads.db_no
        l_pair += bd.l_pair
        l_teacher += bd.l_teacher
        l_point += bd.l_point
        total += bd.total
    if not (np.all(np.isfinite(acc_dW_yes)) and np.all(np.isfinite(acc_dW_no))):
        raise FloatingPointError("non-finite gradient")

    lr = lr_at(state.step, total_steps, tr_cfg)
    _adamw_update(state, ParamGrads(acc_dW_yes, acc_db_yes, acc_dW_no, acc_db_no), lr, tr_cfg)
    n = len(batch)
    agg = GroupLossBreakdown(l_pair / n, l_teacher / n, l_point / n, total / n,
                             np.empty(0))
    state.loss_history.append(agg.total)
    return agg


def train(groups: list[TrainingGroup], store: FeatureStore, obj_cfg: ObjectiveConfig,
          tr_cfg: TrainerConfig, init: ScorerParams | None = None) -> tuple[ScorerParams, dict]:
    """Run the full optimization; returns final parameters and a report.

    The report carries per-epoch mean losses (total and the three
    components) and the learning-rate trace.
    """
    tr_cfg.validate()
    obj_cfg.validate()
    if not groups and tr_cfg.epochs > 0:
        raise ValueError("no training groups")
    params = init.copy() if init is not None else init_params(store.dim, tr_cfg.seed)
    state = TrainState(params=params)
    steps_per_epoch = math.ceil(len(groups) / tr_cfg.groups_per_step) if groups else 0
    total_steps = max(tr_cfg.epochs * steps_per_epoch, 1)
    rng = np.random.default_rng(tr_cfg.seed)
    epoch_rows = []
    lr_trace = []
    for epoch in range(tr_cfg.epochs):
        order = rng.permutation(len(groups))
        sums = np.zeros(4)
        nsteps = 0
        for start in range(0, len(groups), tr_cfg.groups_per_step):
            batch = [groups[i] for i in order[start:start + tr_cfg.groups_per_step]]
            lr_trace.append(lr_at(state.step, total_steps, tr_cfg))
            bd = train_step(state, batch, store, obj_cfg, tr_cfg, total_steps)
            sums += (bd.total, bd.l_pair, bd.l_teacher, bd.l_point)
            nsteps += 1
        mean = sums / max(nsteps, 1)
        epoch_rows.append({"epoch": epoch, "mean_total": mean[0], "mean_pair": mean[1],
                           "mean_teacher": mean[2], "mean_point": mean[3]})
    report = {"epochs": epoch_rows, "lr_trace": lr_trace,
              "steps": state.step, "loss_history": list(state.loss_history)}
    return state.params, report


def grad_check(dim: int, group_size: int, trials: int, seed: int,
               obj_cfg: ObjectiveConfig | None = None, epsilon: float = 1e-5) -> dict:
    """Compare analytic parameter gradients to central finite differences.

    Random groups with random features; the finite-difference side
    perturbs every parameter entry independently. Returns the worst
    relative error seen across all trials and entries.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if dim > 16:
        raise ValueError("dim must be <= 16 for the finite-difference harness")
    cfg = obj_cfg or ObjectiveConfig()
    rng = np.random.default_rng(seed)
    worst = 0.0

    def total_loss(group, params, store):
        _q, _V, scores = group_scores(group, params, store)
        return group_loss(scores, 0, np.asarray(group.teacher_probs),
                          np.asarray(group.labels), cfg).total

    for _ in range(trials):
        qid, vids = "q", [f"v{i}" for i in range(group_size)]
        store = FeatureStore(
            dim,
            {qid: rng.normal(size=dim)},
            {v: rng.normal(size=dim) for v in vids},
        )
        group = TrainingGroup(qid, vids[0], vids[1:],
                              list(rng.uniform(0, 1, size=group_size)),
                              [1] + [0] * (group_size - 1))
        params = init_params(dim, int(rng.integers(0, 2 ** 31)))
        analytic, _bd = param_gradients(group, params, store, cfg)

        fd_entries: list[float] = []
        an_entries: list[float] = []
        for name, grad_block in (("W_yes", analytic.dW_yes), ("W_no", analytic.dW_no)):
            W = getattr(params, name)
            for idx in np.ndindex(W.shape):
                orig = W[idx]
                W[idx] = orig + epsilon
                up = total_loss(group, params, store)
                W[idx] = orig - epsilon
                down = total_loss(group, params, store)
                W[idx] = orig
                fd_entries.append((up - down) / (2 * epsilon))
                an_entries.append(grad_block[idx])
        for name, grad_val in (("b_yes", analytic.db_yes), ("b_no", analytic.db_no)):
            orig = getattr(params, name)
            setattr(params, name, orig + epsilon)
            up = total_loss(group, params, store)
            setattr(params, name, orig - epsilon)
            down = total_loss(group, params, store)
            setattr(params, name, orig)
            fd_entries.append((up - down) / (2 * epsilon))
            an_entries.append(grad_val)
        fd_vec = np.array(fd_entries)
        an_vec = np.array(an_entries)
        # vector-norm relative error: robust when individual entries vanish
        denom = max(np.linalg.norm(fd_vec), np.linalg.norm(an_vec), 1e-12)
        worst = max(worst, float(np.linalg.norm(fd_vec - an_vec) / denom))

    return {"max_relative_error": worst, "trials": trials, "dim": dim,
            "group_size": group_size, "epsilon": epsilon}
