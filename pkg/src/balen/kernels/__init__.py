"""Backend selection for the numeric hot kernels.

The BALEN_BACKEND environment variable picks the implementation at import
time: "numba" (require the jitted kernels), "numpy" (pure-numpy fallback),
or unset/"auto" (numba when importable, numpy otherwise). Both backends
compute the same quantities, but results may differ in the last ulp: numpy
sums pairwise where the jitted loops sum sequentially, and numpy's
vectorized exp/log are not bit-for-bit libm's scalar ones. Reruns are
byte-reproducible per backend; long runs are not guaranteed identical
across backends.
"""

import os

from . import numpy_backend

_requested = os.environ.get("BALEN_BACKEND", "auto").lower()

if _requested not in ("auto", "numba", "numpy"):
    raise RuntimeError(f"BALEN_BACKEND must be 'numba', 'numpy' or 'auto', got {_requested!r}")

if _requested == "numpy":
    _active = numpy_backend
elif _requested == "numba":
    from . import numba_backend as _active
else:
    try:
        from . import numba_backend as _active
    except ImportError:
        _active = numpy_backend

BACKEND = _active.NAME

logsumexp_rows = _active.logsumexp_rows
softmax_rows = _active.softmax_rows
adam_update = _active.adam_update


def warmup():
    """Trigger jit compilation of every kernel (no-op on the numpy path)."""
    import numpy as np

    x = np.zeros((2, 3))
    logsumexp_rows(x, 1.0)
    softmax_rows(x)
    p = np.zeros(4)
    adam_update(p, np.zeros(4), np.zeros(4), np.zeros(4), 0.0, 0.9, 0.999, 1e-8, 0.1, 0.001)
