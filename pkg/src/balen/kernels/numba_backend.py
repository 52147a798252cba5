"""Numba-jitted implementations of the hot kernels.

Loop bodies are written out explicitly; numba fuses them into single passes,
which beats the temporary-heavy numpy forms once rows number in the hundreds.
Importing this module requires numba.
"""

import math

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True)
def logsumexp_rows(x, T):
    n, k = x.shape
    out = np.empty(n)
    for i in range(n):
        m = x[i, 0]
        for j in range(1, k):
            if x[i, j] > m:
                m = x[i, j]
        s = 0.0
        for j in range(k):
            s += math.exp((x[i, j] - m) / T)
        out[i] = m + T * math.log(s)
    return out


@njit(cache=True)
def softmax_rows(x):
    n, k = x.shape
    out = np.empty((n, k))
    for i in range(n):
        m = x[i, 0]
        for j in range(1, k):
            if x[i, j] > m:
                m = x[i, j]
        s = 0.0
        for j in range(k):
            e = math.exp(x[i, j] - m)
            out[i, j] = e
            s += e
        for j in range(k):
            out[i, j] /= s
    return out


@njit(cache=True)
def adam_update(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):
    for i in range(p.shape[0]):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        p[i] -= lr * (m[i] / bc1) / (math.sqrt(v[i] / bc2) + eps)
