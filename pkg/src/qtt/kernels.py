"""Hot numeric kernels: Matérn-5/2 gram matrices and their backward reductions.

Two interchangeable backends: numba ``@njit`` loops (default when numba is
importable) and pure numpy. Set ``QTT_NUMBA=0`` to force the numpy path.
``benchmarks/bench_kernels.py`` times both.

All functions take float64 arrays; ``ls``/``sv`` are the (non-log)
lengthscale and signal variance.
"""

from __future__ import annotations

import math
import os

import numpy as np

SQRT5 = math.sqrt(5.0)
FIVE_THIRDS = 5.0 / 3.0


def _numba_requested() -> bool:
    flag = os.environ.get("QTT_NUMBA", "auto").strip().lower()
    return flag not in ("0", "false", "off", "no")


# -- pure numpy backend -------------------------------------------------------

def _matern_gram_np(Z, ls, sv):
    """Gram matrix of latents Z plus the scaled distance matrix, (K, D)."""
    diff = Z[:, None, :] - Z[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)) / ls
    np.fill_diagonal(D, 0.0)
    E = np.exp(-SQRT5 * D)
    K = sv * (1.0 + SQRT5 * D + FIVE_THIRDS * D * D) * E
    np.fill_diagonal(K, sv)
    return K, D


def _matern_cross_np(Za, Zb, ls, sv):
    diff = Za[:, None, :] - Zb[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)) / ls
    E = np.exp(-SQRT5 * D)
    return sv * (1.0 + SQRT5 * D + FIVE_THIRDS * D * D) * E


def _matern_backward_np(P, Z, D, ls, sv):
    """Backward reductions for the NLL: upstream P = dNLL/dK_y (symmetric).

    Returns (dNLL/dZ, dNLL/dlog ls, dNLL/dlog sv).
    """
    E = np.exp(-SQRT5 * D)
    K = sv * (1.0 + SQRT5 * D + FIVE_THIRDS * D * D) * E
    np.fill_diagonal(K, sv)
    g_logsv = float((P * K).sum())
    g_logls = float((P * (sv * FIVE_THIRDS * D * D * (1.0 + SQRT5 * D) * E)).sum())
    # (dK/dd)/d stays finite at d=0; diagonal cancels in the rowsum form.
    W = P * (-sv * FIVE_THIRDS * (1.0 + SQRT5 * D) * E)
    rowsum = W.sum(axis=1)
    dZ = (2.0 / (ls * ls)) * (rowsum[:, None] * Z - W @ Z)
    return dZ, g_logls, g_logsv


# -- numba backend (same math, explicit loops) --------------------------------

def _matern_gram_loops(Z, ls, sv):
    n, k = Z.shape
    K = np.empty((n, n))
    D = np.empty((n, n))
    for i in range(n):
        K[i, i] = sv
        D[i, i] = 0.0
        for j in range(i + 1, n):
            s = 0.0
            for t in range(k):
                diff = Z[i, t] - Z[j, t]
                s += diff * diff
            d = math.sqrt(s) / ls
            e = math.exp(-SQRT5 * d)
            kij = sv * (1.0 + SQRT5 * d + FIVE_THIRDS * d * d) * e
            K[i, j] = kij
            K[j, i] = kij
            D[i, j] = d
            D[j, i] = d
    return K, D


def _matern_cross_loops(Za, Zb, ls, sv):
    n, k = Za.shape
    m = Zb.shape[0]
    K = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                diff = Za[i, t] - Zb[j, t]
                s += diff * diff
            d = math.sqrt(s) / ls
            e = math.exp(-SQRT5 * d)
            K[i, j] = sv * (1.0 + SQRT5 * d + FIVE_THIRDS * d * d) * e
    return K


def _matern_backward_loops(P, Z, D, ls, sv):
    n, k = Z.shape
    dZ = np.zeros((n, k))
    g_logls = 0.0
    g_logsv = 0.0
    scale = 2.0 / (ls * ls)
    for i in range(n):
        g_logsv += P[i, i] * sv
        for j in range(i + 1, n):
            d = D[i, j]
            e = math.exp(-SQRT5 * d)
            g_logsv += 2.0 * P[i, j] * sv * (1.0 + SQRT5 * d + FIVE_THIRDS * d * d) * e
            g_logls += 2.0 * P[i, j] * sv * FIVE_THIRDS * d * d * (1.0 + SQRT5 * d) * e
            w = P[i, j] * (-sv * FIVE_THIRDS * (1.0 + SQRT5 * d) * e)
            for t in range(k):
                delta = scale * w * (Z[i, t] - Z[j, t])
                dZ[i, t] += delta
                dZ[j, t] -= delta
    return dZ, g_logls, g_logsv


NUMPY_IMPL = {
    "matern_gram": _matern_gram_np,
    "matern_cross": _matern_cross_np,
    "matern_backward": _matern_backward_np,
}

_numba_impl: dict | None = None


def numba_impl() -> dict | None:
    """Compile (lazily) and return the numba backend, or None without numba."""
    global _numba_impl
    if _numba_impl is None:
        try:
            from numba import njit
        except ImportError:
            return None
        _numba_impl = {
            "matern_gram": njit(cache=True)(_matern_gram_loops),
            "matern_cross": njit(cache=True)(_matern_cross_loops),
            "matern_backward": njit(cache=True)(_matern_backward_loops),
        }
    return _numba_impl


if _numba_requested() and numba_impl() is not None:
    ACTIVE_BACKEND = "numba"
    _impl = numba_impl()
else:
    ACTIVE_BACKEND = "numpy"
    _impl = NUMPY_IMPL

matern_gram = _impl["matern_gram"]
matern_cross = _impl["matern_cross"]
matern_backward = _impl["matern_backward"]
