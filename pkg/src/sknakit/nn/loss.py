"""Class-weighted cross-entropy with its analytic logit gradient."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError


def weighted_cross_entropy(logits: np.ndarray, labels: np.ndarray, class_weights):
    """Weighted-mean cross entropy over a batch.

    loss = sum_i w_{y_i} * (-log softmax(logits_i)[y_i]) / sum_i w_{y_i}

    Dividing by the summed batch weights keeps the gradient scale stable
    however imbalanced a mini-batch happens to be. Returns
    (loss, dloss/dlogits); log-softmax is computed with the row max
    subtracted.
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    weights = np.asarray(class_weights, dtype=logits.dtype)
    if logits.ndim != 2:
        raise ShapeError(f"logits must be 2-D, got shape {logits.shape}")
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} != ({n},)")
    if weights.shape != (k,):
        raise ShapeError(f"class_weights shape {weights.shape} != ({k},)")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels outside [0, {k})")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    w = weights[labels]
    w_sum = w.sum()
    loss = float(-(w * log_probs[np.arange(n), labels]).sum() / w_sum)

    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits *= (w / w_sum)[:, None]
    return loss, dlogits.astype(logits.dtype)
