from typing import Sequence, Union

import numpy as np

from TensorCore import TensorOps as ops
from TensorCore.Tensor import Tensor, ArrayLike
from util.FAConfException import LabelIndexException, ShapeException

Labels = Union[int, Sequence[int], np.ndarray]


def _batched(logits: ArrayLike, labels: Labels):
    logits = ops.as_tensor(logits)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if logits.ndim == 1:
        logits = ops.reshape(logits, (1, logits.shape[0]))
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise ShapeException("logits must be [n_classes] or [B, n_classes] with one label per row",
                             logits.shape, labels.shape)
    n_classes = logits.shape[1]
    bad = labels[(labels < 0) | (labels >= n_classes)]
    if bad.size:
        raise LabelIndexException(f"label {int(bad[0])} outside [0, {n_classes})")
    return logits, labels


def _nll(log_probs: Tensor, labels: np.ndarray) -> Tensor:
    picked = ops.getitem(log_probs, (np.arange(labels.shape[0]), labels))
    return -ops.reduce_mean(picked)


def cross_entropy(logits: ArrayLike, labels: Labels) -> Tensor:
    """
    -log softmax(logits)[label], averaged over the batch.

    Raises:
        LabelIndexException: For a label outside [0, n_classes).
    """
    logits, labels = _batched(logits, labels)
    return _nll(ops.log_softmax(logits, axis=-1), labels)


def symmetric_kl(logits1: ArrayLike, logits2: ArrayLike) -> Tensor:
    """KL(p1||p2) + KL(p2||p1) per row, averaged over the batch."""
    log_p1 = ops.log_softmax(logits1, axis=-1)
    log_p2 = ops.log_softmax(logits2, axis=-1)
    difference = log_p1 - log_p2
    per_row = ops.reduce_sum((ops.exp(log_p1) - ops.exp(log_p2)) * difference, axis=-1)
    return ops.reduce_mean(per_row)


def rdrop_loss(logits1: ArrayLike, logits2: ArrayLike, labels: Labels, alpha: float) -> Tensor:
    """
    R-Drop loss of two dropout passes over the same input:
    L = (CE1 + CE2) / 2 + alpha / 2 * (KL(p1||p2) + KL(p2||p1)).
    """
    logits1, labels = _batched(logits1, labels)
    logits2, _ = _batched(logits2, labels)
    ce = (_nll(ops.log_softmax(logits1, axis=-1), labels) + _nll(ops.log_softmax(logits2, axis=-1), labels)) * 0.5
    if alpha == 0.0:
        return ce
    return ce + symmetric_kl(logits1, logits2) * (alpha / 2.0)
