"""Hot numeric kernels: numba fast path with a pure-numpy fallback.

The numba path is used whenever numba imports successfully. Set the
environment variable ``KRRDP_NUMBA=0`` before import to force the numpy
fallback (used by ``benchmarks/bench_accel.py`` to compare both paths).
Both paths are deterministic element-by-element, so results do not depend
on the numba thread count.
"""

import os

import numpy as np

_env = os.environ.get("KRRDP_NUMBA", "1")

HAS_NUMBA = False
if _env != "0":
    try:
        import numba

        HAS_NUMBA = True
    except ImportError:
        HAS_NUMBA = False


def _rbf_gram_numpy(X, Y, lengthscale):
    sq = np.sum(X * X, axis=1)[:, None] + np.sum(Y * Y, axis=1)[None, :]
    sq -= 2.0 * (X @ Y.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(sq * (-0.5 / lengthscale**2))


def _rbf_predict_numpy(X, centers, coef, lengthscale):
    # Chunked so big evaluation batches never materialize a huge Gram block.
    n = X.shape[0]
    out = np.empty(n)
    step = max(1, 2**22 // max(1, centers.shape[0]))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        out[lo:hi] = _rbf_gram_numpy(X[lo:hi], centers, lengthscale) @ coef
    return out


if HAS_NUMBA:

    @numba.njit(cache=True, parallel=True)
    def _rbf_gram_numba(X, Y, lengthscale):  # pragma: no cover - jitted
        n, d = X.shape
        m = Y.shape[0]
        inv = 0.5 / (lengthscale * lengthscale)
        out = np.empty((n, m))
        for i in numba.prange(n):
            for j in range(m):
                s = 0.0
                for k in range(d):
                    diff = X[i, k] - Y[j, k]
                    s += diff * diff
                out[i, j] = np.exp(-s * inv)
        return out

    @numba.njit(cache=True, parallel=True)
    def _rbf_predict_numba(X, centers, coef, lengthscale):  # pragma: no cover
        n, d = X.shape
        m = centers.shape[0]
        inv = 0.5 / (lengthscale * lengthscale)
        out = np.empty(n)
        for i in numba.prange(n):
            acc = 0.0
            for j in range(m):
                s = 0.0
                for k in range(d):
                    diff = X[i, k] - centers[j, k]
                    s += diff * diff
                acc += coef[j] * np.exp(-s * inv)
            out[i] = acc
        return out


def rbf_gram(X, Y, lengthscale):
    """Gram block exp(-||x - y||^2 / (2 l^2)) for row sets X (n,d), Y (m,d)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if HAS_NUMBA:
        return _rbf_gram_numba(X, Y, float(lengthscale))
    return _rbf_gram_numpy(X, Y, float(lengthscale))


def rbf_predict(X, centers, coef, lengthscale):
    """Kernel expansion sum_j coef_j k(c_j, x_i) for a batch X (n,d)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    coef = np.ascontiguousarray(coef, dtype=np.float64)
    if HAS_NUMBA:
        return _rbf_predict_numba(X, centers, coef, float(lengthscale))
    return _rbf_predict_numpy(X, centers, coef, float(lengthscale))
