"""Proposal and head losses evaluated on stored predictions."""
from dataclasses import dataclass

import numpy as np

PROB_EPS = 1e-7


@dataclass(frozen=True)
class LossReport:
    cls_loss: float
    reg_loss: float
    total: float
    n_pos: int
    n_sampled: int


def smooth_l1(x, beta=1.0):
    """Huber-style loss: ``0.5 x^2 / beta`` inside ``|x| < beta``, ``|x| - beta/2`` outside."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    out = np.where(ax < beta, 0.5 * x * x / beta, ax - 0.5 * beta)
    return out if out.ndim else float(out)


def smooth_l1_grad(x, beta=1.0):
    x = np.asarray(x, dtype=np.float64)
    out = np.where(np.abs(x) < beta, x / beta, np.sign(x))
    return out if out.ndim else float(out)


def sigmoid(logits):
    """Objectness probability from a single logit per anchor."""
    z = np.asarray(logits, dtype=np.float64)
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def binary_ce(p, label):
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    label = np.asarray(label, dtype=np.float64)
    out = -label * np.log(p) - (1.0 - label) * np.log1p(-p)
    return out if out.ndim else float(out)


def rpn_loss(pred_scores, pred_deltas, target_labels, target_deltas, n=256):
    """Objectness cross-entropy plus smooth-L1 box loss over a sampled batch.

    Both terms are divided by ``n``. Regression counts only samples whose
    target label is 1.

    Args:
        pred_scores: ``(B,)`` foreground probabilities.
        pred_deltas: ``(B, 6)`` predicted deltas.
        target_labels: ``(B,)`` labels in {0, 1}.
        target_deltas: ``(B, 6)`` encoded targets (ignored for negatives).
        n: normaliser, the nominal mini-batch size.
    """
    p = np.asarray(pred_scores, dtype=np.float64).reshape(-1)
    d = np.asarray(pred_deltas, dtype=np.float64).reshape(-1, 6)
    y = np.asarray(target_labels).reshape(-1)
    t = np.asarray(target_deltas, dtype=np.float64).reshape(-1, 6)
    if not (len(p) == len(d) == len(y) == len(t)):
        raise ValueError("prediction and target batches differ in length")
    if n <= 0:
        raise ValueError("n must be positive")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("RPN labels must be 0 or 1")
    pos = y == 1
    cls = float(np.sum(binary_ce(p, y))) / n
    reg = float(np.sum(smooth_l1(d[pos] - t[pos]))) / n
    return LossReport(cls, reg, cls + reg, int(pos.sum()), len(p))


def head_loss(pred_class_probs, pred_deltas, target_labels, target_deltas, n=None):
    """Multi-class cross-entropy plus smooth-L1 on the target class's deltas.

    Labels run over ``0..K-1`` for object classes with ``K`` meaning
    background; ``pred_class_probs`` is ``(B, K+1)`` and ``pred_deltas`` is
    ``(B, K, 6)``. Normalised by ``n`` (default: the batch size).
    """
    probs = np.asarray(pred_class_probs, dtype=np.float64)
    if probs.ndim != 2:
        raise ValueError("class probabilities must be (B, K+1)")
    b, k1 = probs.shape
    deltas = np.asarray(pred_deltas, dtype=np.float64).reshape(b, k1 - 1, 6)
    y = np.asarray(target_labels, dtype=np.int64).reshape(-1)
    t = np.asarray(target_deltas, dtype=np.float64).reshape(-1, 6)
    if len(y) != b or len(t) != b:
        raise ValueError("prediction and target batches differ in length")
    if np.any(probs < -1e-12) or np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("class probabilities must lie on the simplex")
    if np.any((y < 0) | (y >= k1)):
        raise ValueError("class label out of range")
    n = b if n is None else n
    if n <= 0:
        raise ValueError("n must be positive")
    p_true = np.clip(probs[np.arange(b), y], PROB_EPS, 1.0)
    cls = float(-np.sum(np.log(p_true))) / n
    fg = np.flatnonzero(y < k1 - 1)
    reg = float(np.sum(smooth_l1(deltas[fg, y[fg]] - t[fg]))) / n
    return LossReport(cls, reg, cls + reg, len(fg), b)
