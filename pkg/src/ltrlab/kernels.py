"""Hot numeric kernels with numba-accelerated and pure-numpy backends.

The numba path is the default. Set LTRLAB_NO_NUMBA=1 before import to
select the pure-numpy fallback (useful for debugging and as a reference
in benchmarks). Both backends agree to float64 rounding differences
(summation order differs), never in ordering-relevant magnitude.
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("LTRLAB_NO_NUMBA", "0") not in ("1", "true", "yes")


# ---------------------------------------------------------------------------
# pure-numpy reference implementations

def bilinear_logits_numpy(q, V, W, b):
    """Logits q^T W v_i + b for each row v_i of V. Returns (n,) float64."""
    return (q @ W) @ V.T + b


def grad_outer_numpy(q, V, g):
    """Sum_i g_i * outer(q, v_i) as a (dim, dim) matrix."""
    return np.outer(q, V.T @ g)


def auc_pair_count_numpy(pos, neg):
    """Exact AUC by pair enumeration; ties count 1/2."""
    diff = pos[:, None] - neg[None, :]
    wins = np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0)
    return wins / (pos.size * neg.size)


# ---------------------------------------------------------------------------
# numba backends

if USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _bilinear_logits_nb(q, V, W, b):
        n, dim = V.shape
        qW = np.zeros(dim)
        for a in range(dim):
            qa = q[a]
            for c in range(dim):
                qW[c] += qa * W[a, c]
        out = np.empty(n)
        for i in range(n):
            acc = 0.0
            for c in range(dim):
                acc += qW[c] * V[i, c]
            out[i] = acc + b
        return out

    @njit(cache=True)
    def _grad_outer_nb(q, V, g):
        n, dim = V.shape
        gv = np.zeros(dim)
        for i in range(n):
            gi = g[i]
            for c in range(dim):
                gv[c] += gi * V[i, c]
        out = np.empty((dim, dim))
        for a in range(dim):
            for c in range(dim):
                out[a, c] = q[a] * gv[c]
        return out

    @njit(cache=True)
    def _auc_pair_count_nb(pos, neg):
        wins = 0.0
        for i in range(pos.size):
            p = pos[i]
            for j in range(neg.size):
                if p > neg[j]:
                    wins += 1.0
                elif p == neg[j]:
                    wins += 0.5
        return wins / (pos.size * neg.size)

    def bilinear_logits(q, V, W, b):
        return _bilinear_logits_nb(
            np.ascontiguousarray(q, dtype=np.float64),
            np.ascontiguousarray(V, dtype=np.float64),
            np.ascontiguousarray(W, dtype=np.float64),
            float(b),
        )

    def grad_outer(q, V, g):
        return _grad_outer_nb(
            np.ascontiguousarray(q, dtype=np.float64),
            np.ascontiguousarray(V, dtype=np.float64),
            np.ascontiguousarray(g, dtype=np.float64),
        )

    def auc_pair_count(pos, neg):
        return _auc_pair_count_nb(
            np.ascontiguousarray(pos, dtype=np.float64),
            np.ascontiguousarray(neg, dtype=np.float64),
        )

else:
    bilinear_logits = bilinear_logits_numpy
    grad_outer = grad_outer_numpy
    auc_pair_count = auc_pair_count_numpy
