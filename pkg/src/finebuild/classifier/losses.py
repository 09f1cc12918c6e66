"""Training losses.

Two cross-entropies are mixed by a factor alpha: a distillation loss on
the teacher-space logits against the frozen teacher's predicted class, and
a task loss on the ground-truth class probabilities:

    L_con = -z[c] + log sum_j exp(z[j])
    L_cls = -log(p_c)
    Loss  = alpha * L_con + (1 - alpha) * L_cls

The canonical functions here work on float64 numpy arrays (single sample
or batch; batch values are means over samples). The log-sum-exp subtracts
the max logit before exponentiating, and task probabilities are floored at
PROB_FLOOR. Hand-derived logit gradients are provided for verification
against finite differences; the torch twins used inside the training loop
implement the same formulas and are parity-tested against these.
"""

from __future__ import annotations

import logging

import numpy as np
import torch

from ..errors import IndexOutOfRange, InvalidAlpha

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


def _as_batch(z, labels) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z[None, :]
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if labels.shape[0] != z.shape[0]:
        raise IndexOutOfRange("one label per row required")
    if np.any(labels < 0) or np.any(labels >= z.shape[1]):
        raise IndexOutOfRange(
            f"label outside [0, {z.shape[1]}): {labels.tolist()}"
        )
    return z, labels


def softmax(z: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax along the last axis."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def contrastive_loss(z, c) -> float:
    """Cross-entropy of teacher-space logits against the teacher class:
    -z[c] + logsumexp(z), averaged over the batch."""
    z, c = _as_batch(z, c)
    m = z.max(axis=1)
    lse = m + np.log(np.exp(z - m[:, None]).sum(axis=1))
    picked = z[np.arange(z.shape[0]), c]
    return float(np.mean(lse - picked))


def contrastive_loss_logit_grad(z, c) -> np.ndarray:
    """Hand-derived gradient of contrastive_loss w.r.t. the logits:
    (softmax(z) - onehot(c)) / batch_size."""
    z, c = _as_batch(z, c)
    g = softmax(z)
    g[np.arange(z.shape[0]), c] -= 1.0
    g /= z.shape[0]
    return g


def classification_loss(probs, label) -> float:
    """Ground-truth cross-entropy -log(p_c) on probabilities, batch mean.

    Probabilities at or below zero are floored to PROB_FLOOR and flagged
    via the module logger.
    """
    p, label = _as_batch(probs, label)
    picked = p[np.arange(p.shape[0]), label]
    if np.any(picked <= 0.0):
        logger.warning(
            "non-positive class probability clamped to %g in classification loss",
            PROB_FLOOR,
        )
    return float(np.mean(-np.log(np.maximum(picked, PROB_FLOOR))))


def classification_loss_from_logits(z, label) -> float:
    return classification_loss(softmax(z), label)


def classification_loss_logit_grad(z, label) -> np.ndarray:
    """Gradient of classification_loss_from_logits w.r.t. the logits:
    (softmax(z) - onehot(label)) / batch_size."""
    return contrastive_loss_logit_grad(z, label)


def combined_loss(l_con: float, l_cls: float, alpha: float) -> float:
    """alpha-weighted mix; alpha=0 reduces exactly to the task loss and
    alpha=1 to the distillation loss."""
    if not 0.0 <= alpha <= 1.0:
        raise InvalidAlpha(f"alpha must lie in [0, 1], got {alpha}")
    return alpha * l_con + (1.0 - alpha) * l_cls


# --- torch twins used inside the training loop ------------------------------

def torch_contrastive_loss(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    lse = torch.logsumexp(logits, dim=1)
    picked = logits.gather(1, targets.view(-1, 1)).squeeze(1)
    return (lse - picked).mean()


def torch_classification_loss(task_logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    probs = torch.softmax(task_logits, dim=1)
    picked = probs.gather(1, labels.view(-1, 1)).squeeze(1)
    return -torch.log(picked.clamp_min(PROB_FLOOR)).mean()
