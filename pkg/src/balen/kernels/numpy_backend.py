"""Pure-numpy implementations of the hot kernels.

Every function here has a numba twin in ``numba_backend``; the active set is
chosen in ``balen.kernels`` via the BALEN_BACKEND environment variable.
"""

import numpy as np

NAME = "numpy"


def logsumexp_rows(x, T):
    """Row-wise T*log(sum(exp(x/T))), max-shifted so no intermediate overflows."""
    m = np.max(x, axis=1)
    shifted = (x - m[:, None]) / T
    return m + T * np.log(np.sum(np.exp(shifted), axis=1))


def softmax_rows(x):
    """Row-wise softmax, max-shifted."""
    shifted = x - np.max(x, axis=1)[:, None]
    e = np.exp(shifted)
    return e / np.sum(e, axis=1)[:, None]


def adam_update(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):
    """In-place Adam step on flat arrays.

    bc1/bc2 are the bias corrections 1-beta1**t and 1-beta2**t for the
    current step t, precomputed by the caller.
    """
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
