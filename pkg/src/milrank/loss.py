"""Ranking objective on paired positive/negative bags.

For one pair, with ``p`` and ``q`` the positive and negative segment
scores and m segments per bag:

    hinge      = max(0, margin - max_i p[i] + max_i q[i])
    smoothness = smoothness_weight * sum_{i<m-1} (p[i] - p[i+1])^2
    sparsity   = sparsity_weight   * sum_i p[i]

The smoothness and sparsity terms act on the positive bag only.  A batch
averages the pair totals and adds ``weight_decay`` times the squared
Frobenius norm of the weight matrices (biases excluded).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import MlpModel
from .validation import check_score_vector


@dataclass(frozen=True)
class LossParams:
    smoothness_weight: float = 8e-5
    sparsity_weight: float = 8e-5
    weight_decay: float = 1e-3
    margin: float = 1.0

    def __post_init__(self):
        if self.smoothness_weight < 0 or self.sparsity_weight < 0 or self.weight_decay < 0:
            raise ValueError("loss weights must be non-negative")
        if self.margin <= 0:
            raise ValueError(f"margin must be positive, got {self.margin}")


@dataclass(frozen=True)
class BagLossBreakdown:
    hinge: float
    smoothness: float
    sparsity: float
    argmax_pos: int
    argmax_neg: int

    @property
    def total(self) -> float:
        return self.hinge + self.smoothness + self.sparsity


def _check_pair(pos_scores, neg_scores) -> tuple[np.ndarray, np.ndarray]:
    p = check_score_vector(pos_scores, name="pos_scores")
    q = check_score_vector(neg_scores, name="neg_scores")
    if p.shape[0] != q.shape[0]:
        raise ValueError(f"score vectors differ in length: {p.shape[0]} vs {q.shape[0]}")
    if p.shape[0] < 2:
        raise ValueError("bags need at least 2 segments")
    return p, q


def pair_loss(pos_scores, neg_scores, params: LossParams) -> BagLossBreakdown:
    """Loss terms for one positive/negative bag pair.

    Argmax ties break toward the lowest segment index.
    """
    p, q = _check_pair(pos_scores, neg_scores)
    i_pos = int(np.argmax(p))
    i_neg = int(np.argmax(q))
    hinge = max(0.0, params.margin - p[i_pos] + q[i_neg])
    diffs = p[:-1] - p[1:]
    smoothness = params.smoothness_weight * float(diffs @ diffs)
    sparsity = params.sparsity_weight * float(p.sum())
    return BagLossBreakdown(hinge=float(hinge), smoothness=smoothness, sparsity=sparsity,
                            argmax_pos=i_pos, argmax_neg=i_neg)


def pair_loss_grad(pos_scores, neg_scores, params: LossParams) -> tuple[np.ndarray, np.ndarray]:
    """Subgradient of ``pair_loss(...).total`` with respect to both score vectors.

    When the hinge is active only the two argmax entries receive its
    gradient; the smoothness term contributes the one-sided discrete
    Laplacian of the positive scores, and sparsity a constant.
    """
    p, q = _check_pair(pos_scores, neg_scores)
    breakdown = pair_loss(p, q, params)
    dpos = np.full(p.shape[0], params.sparsity_weight, dtype=np.float64)
    dneg = np.zeros(q.shape[0], dtype=np.float64)
    diffs = p[:-1] - p[1:]
    dpos[:-1] += 2.0 * params.smoothness_weight * diffs
    dpos[1:] -= 2.0 * params.smoothness_weight * diffs
    if breakdown.hinge > 0.0:
        dpos[breakdown.argmax_pos] -= 1.0
        dneg[breakdown.argmax_neg] += 1.0
    return dpos, dneg


def weight_decay_term(model: MlpModel, params: LossParams) -> float:
    """weight_decay times the summed squared entries of all weight matrices."""
    total = 0.0
    for w in (model.w1, model.w2, model.w3):
        total += float((w * w).sum())
    return params.weight_decay * total


def weight_decay_grads(model: MlpModel, params: LossParams) -> dict[str, np.ndarray]:
    """Gradient contribution of the regularizer (zero for biases)."""
    return {
        "w1": 2.0 * params.weight_decay * model.w1,
        "b1": np.zeros_like(model.b1),
        "w2": 2.0 * params.weight_decay * model.w2,
        "b2": np.zeros_like(model.b2),
        "w3": 2.0 * params.weight_decay * model.w3,
        "b3": np.zeros_like(model.b3),
    }


def batch_loss(pairs, params: LossParams, model: MlpModel) -> float:
    """Mean pair total over a batch plus the weight-decay term."""
    if not pairs:
        raise ValueError("batch_loss requires at least one pair")
    total = 0.0
    for pos_scores, neg_scores in pairs:
        total += pair_loss(pos_scores, neg_scores, params).total
    return total / len(pairs) + weight_decay_term(model, params)
