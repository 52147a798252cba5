"""Numerically stable scalar/vector primitives.

All exp-sums are max-shifted, so inputs anywhere in the finite float64 range
are safe. Scalar entry points accept any 1-D array-like of logits; the
batched ``*_batch`` variants take (N, K) arrays and are what the training
loop actually calls.
"""

import numpy as np

from .errors import EmptyInput, InvalidArgument
from .kernels import logsumexp_rows, softmax_rows


def _as_logits(values):
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidArgument(f"logits must be a 1-D vector, got shape {v.shape}")
    if v.size == 0:
        raise EmptyInput("logits vector is empty")
    if not np.all(np.isfinite(v)):
        raise InvalidArgument("logits contain non-finite entries")
    return v


def _as_batch(values):
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[None, :]
    if v.ndim != 2:
        raise InvalidArgument(f"expected (N, K) logits, got shape {v.shape}")
    if v.shape[0] == 0 or v.shape[1] == 0:
        raise EmptyInput("logit batch is empty")
    if not np.all(np.isfinite(v)):
        raise InvalidArgument("logits contain non-finite entries")
    return np.ascontiguousarray(v)


def _check_temperature(T):
    T = float(T)
    if not np.isfinite(T) or T <= 0.0:
        raise InvalidArgument(f"temperature must be positive, got {T}")
    return T


def log_sum_exp(values, T=1.0):
    """T * log(sum_j exp(v_j / T)) for a single vector."""
    v = _as_logits(values)
    T = _check_temperature(T)
    return float(logsumexp_rows(v[None, :], T)[0])


def log_sum_exp_batch(values, T=1.0):
    return logsumexp_rows(_as_batch(values), _check_temperature(T))


def energy_score(values, T=1.0):
    """Energy of a logit vector: -T * log(sum exp(v/T)). Low for confident inputs."""
    return -log_sum_exp(values, T)


def energy_score_batch(values, T=1.0):
    return -log_sum_exp_batch(values, T)


def softmax(values):
    """Probability vector exp(v - max) / sum; sums to 1 within 1e-12."""
    v = _as_logits(values)
    return softmax_rows(v[None, :])[0]


def softmax_batch(values):
    return softmax_rows(_as_batch(values))


def msp_score(values):
    """Maximum softmax probability, the classic baseline detection score."""
    return float(np.max(softmax(values)))


def msp_score_batch(values):
    return np.max(softmax_batch(values), axis=1)


def cross_entropy(values, label):
    """-log softmax(v)_y, computed as log_sum_exp(v) - v_y."""
    v = _as_logits(values)
    label = int(label)
    if not 0 <= label < v.size:
        raise InvalidArgument(f"label {label} out of range for {v.size} classes")
    return float(logsumexp_rows(v[None, :], 1.0)[0] - v[label])


def cross_entropy_batch(values, labels):
    v = _as_batch(values)
    labels = np.asarray(labels)
    if labels.shape != (v.shape[0],):
        raise InvalidArgument(f"labels shape {labels.shape} does not match batch {v.shape[0]}")
    if labels.size and (labels.min() < 0 or labels.max() >= v.shape[1]):
        raise InvalidArgument("label out of range")
    return logsumexp_rows(v, 1.0) - v[np.arange(v.shape[0]), labels]
