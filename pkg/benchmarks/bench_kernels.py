"""Timing comparison of the pure-numpy kernels against their numba twins.

Imports both backend modules directly (bypassing the BALEN_BACKEND selector)
so one process can race them on identical inputs. Jitted kernels are warmed
up before timing; reported numbers are the best of --repeats runs.

Run from the repo root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 9 --inner 50
"""

import argparse
import timeit

import numpy as np

from balen.kernels import numpy_backend

try:
    from balen.kernels import numba_backend
except ImportError:
    numba_backend = None

LOGIT_SHAPES = [(128, 5), (256, 5), (2048, 64), (16384, 128)]
PARAM_SIZES = [4_549, 100_000, 1_000_000]  # first matches the default 2-64-64-5 net


def best_time(fn, repeats, inner):
    timer = timeit.Timer(fn)
    return min(timer.repeat(repeat=repeats, number=inner)) / inner


def bench_rows(name, numpy_fn, numba_fn, args_for, repeats, inner):
    print(f"\n{name}")
    print(f"  {'shape':>14}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}  {'max|diff|':>10}")
    for shape in LOGIT_SHAPES:
        args = args_for(shape)
        t_np = best_time(lambda: numpy_fn(*args), repeats, inner)
        if numba_fn is None:
            print(f"  {str(shape):>14}  {t_np * 1e6:>8.1f}us  {'-':>10}  {'-':>8}  {'-':>10}")
            continue
        t_nb = best_time(lambda: numba_fn(*args), repeats, inner)
        diff = float(np.max(np.abs(numpy_fn(*args) - numba_fn(*args))))
        print(f"  {str(shape):>14}  {t_np * 1e6:>8.1f}us  {t_nb * 1e6:>8.1f}us"
              f"  {t_np / t_nb:>7.2f}x  {diff:>10.2e}")


def bench_adam(repeats, inner):
    rng = np.random.default_rng(0)
    print("\nadam_update (in-place, one step)")
    print(f"  {'params':>14}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}  {'max|diff|':>10}")
    for n in PARAM_SIZES:
        g = rng.normal(size=n)

        def state():
            return (rng.normal(size=n).copy(), np.zeros(n), np.zeros(n))

        p_np, m_np, v_np = state()
        t_np = best_time(
            lambda: numpy_backend.adam_update(p_np, g, m_np, v_np,
                                              1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001),
            repeats, inner)
        if numba_backend is None:
            print(f"  {n:>14,}  {t_np * 1e6:>8.1f}us  {'-':>10}  {'-':>8}  {'-':>10}")
            continue
        p_nb, m_nb, v_nb = state()
        t_nb = best_time(
            lambda: numba_backend.adam_update(p_nb, g, m_nb, v_nb,
                                              1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001),
            repeats, inner)

        # one clean step from the same state, for the numeric diff column
        pa, ma, va = np.ones(n), np.zeros(n), np.zeros(n)
        pb, mb, vb = np.ones(n), np.zeros(n), np.zeros(n)
        numpy_backend.adam_update(pa, g, ma, va, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)
        numba_backend.adam_update(pb, g, mb, vb, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)
        diff = float(np.max(np.abs(pa - pb)))
        print(f"  {n:>14,}  {t_np * 1e6:>8.1f}us  {t_nb * 1e6:>8.1f}us"
              f"  {t_np / t_nb:>7.2f}x  {diff:>10.2e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5, help="timing repeats, best kept")
    ap.add_argument("--inner", type=int, default=20, help="calls per timing sample")
    args = ap.parse_args()

    if numba_backend is None:
        print("numba backend unavailable; timing the numpy kernels only")
    else:
        numba_backend.logsumexp_rows(np.zeros((2, 3)), 1.0)
        numba_backend.softmax_rows(np.zeros((2, 3)))
        numba_backend.adam_update(np.zeros(4), np.zeros(4), np.zeros(4), np.zeros(4),
                                  0.0, 0.9, 0.999, 1e-8, 0.1, 0.001)
        print("numba kernels warmed up")

    rng = np.random.default_rng(42)
    cache = {}

    def logits_for(shape):
        if shape not in cache:
            cache[shape] = rng.normal(0.0, 3.0, size=shape)
        return cache[shape]

    bench_rows("logsumexp_rows (T=1)",
               numpy_backend.logsumexp_rows,
               None if numba_backend is None else numba_backend.logsumexp_rows,
               lambda s: (logits_for(s), 1.0), args.repeats, args.inner)
    bench_rows("softmax_rows",
               numpy_backend.softmax_rows,
               None if numba_backend is None else numba_backend.softmax_rows,
               lambda s: (logits_for(s),), args.repeats, args.inner)
    bench_adam(args.repeats, args.inner)


if __name__ == "__main__":
    main()
