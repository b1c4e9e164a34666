"""Responsibilities from log posterior weights, dense or restricted to L entries."""
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .counters import CMP, EXP, OpCounts, new_scratch
from .selection import partition_kernel, sort_block

__all__ = [
    "DegenerateWeightsError",
    "SparseResp",
    "dense_resp_from_weights",
    "top_l_resp_from_weights",
    "dense_resp_batch",
    "top_l_resp_batch",
    "densify",
    "total_variation",
    "entropy",
]


class DegenerateWeightsError(ValueError):
    """Too few finite weights to place the requested responsibility mass."""


@dataclass
class SparseResp:
    """L non-zero responsibilities and their cluster indices.

    `values` and `indices` have shape (L,) for one observation or (N, L) for a
    batch; entries of each row are ordered by decreasing weight.
    """

    values: np.ndarray
    indices: np.ndarray
    K: int

    def __post_init__(self):
        if self.values.shape != self.indices.shape:
            raise ValueError("values and indices must have the same shape")

    @property
    def L(self):
        return self.values.shape[-1]

    def __len__(self):
        return self.values.shape[0] if self.values.ndim == 2 else 1


@njit(cache=True, nogil=True)
def dense_rows_kernel(W, R, scratch):
    N, K = W.shape
    for n in range(N):
        mx = -np.inf
        for k in range(K):
            if W[n, k] > mx:
                mx = W[n, k]
        if mx == -np.inf:
            return n
        total = 0.0
        for k in range(K):
            e = math.exp(W[n, k] - mx)
            R[n, k] = e
            total += e
        scratch[0] += K
        for k in range(K):
            R[n, k] /= total
    return -1


@njit(cache=True, nogil=True)
def top_l_rows_kernel(W, L, idx, vals, scratch):
    N, K = W.shape
    perm = np.empty(K, dtype=np.int64)
    by_index = np.empty(K)
    cmp_counter = scratch[1:2]
    for n in range(N):
        row = W[n]
        for k in range(K):
            perm[k] = k
        partition_kernel(perm, row, K, L, cmp_counter)
        sort_block(perm, row, L)
        mx = row[perm[0]]
        if row[perm[L - 1]] == -np.inf:
            return n
        total = 0.0
        for j in range(L):
            e = math.exp(row[perm[j]] - mx)
            vals[n, j] = e
            idx[n, j] = perm[j]
            total += e
        if L == K:
            # sum in cluster order so L=K reproduces the dense values bit for bit
            for j in range(L):
                by_index[perm[j]] = vals[n, j]
            total = 0.0
            for k in range(K):
                total += by_index[k]
        scratch[0] += L
        for j in range(L):
            vals[n, j] /= total
    return -1


def _as_weights(w):
    w = np.asarray(w, dtype=np.float64)
    if np.isnan(w).any():
        raise ValueError("weights contain NaN")
    if np.isposinf(w).any():
        raise ValueError("weights contain +inf")
    return w


def dense_resp_batch(W, counts=None):
    """Row-wise softmax of an (N, K) weight matrix with max shift."""
    W = np.ascontiguousarray(_as_weights(W))
    if W.ndim != 2:
        raise ValueError("expected an (N, K) weight matrix")
    R = np.empty_like(W)
    scratch = new_scratch()
    bad = dense_rows_kernel(W, R, scratch)
    if bad >= 0:
        raise DegenerateWeightsError(f"row {bad} has no finite weight")
    if counts is not None:
        counts.absorb(scratch)
    return R


def top_l_resp_batch(W, L, counts=None):
    """Top-L responsibilities for each row of an (N, K) weight matrix."""
    W = np.ascontiguousarray(_as_weights(W))
    if W.ndim != 2:
        raise ValueError("expected an (N, K) weight matrix")
    N, K = W.shape
    if not 1 <= L <= K:
        raise ValueError(f"L must satisfy 1 <= L <= K={K}, got {L}")
    idx = np.empty((N, L), dtype=np.int64)
    vals = np.empty((N, L), dtype=np.float64)
    scratch = new_scratch()
    bad = top_l_rows_kernel(W, int(L), idx, vals, scratch)
    if bad >= 0:
        raise DegenerateWeightsError(f"row {bad} has fewer than L={L} finite weights")
    if counts is not None:
        counts.absorb(scratch)
    return SparseResp(vals, idx, K)


def dense_resp_from_weights(w, counts=None):
    """Optimal responsibilities: exponentiate (after a max shift) and normalise.

    Parameters
    ----------
    w : array_like, shape (K,)
        Log posterior weights; -inf marks an excluded cluster.

    Returns
    -------
    ndarray, shape (K,)
    """
    w = _as_weights(w)
    if w.ndim != 1:
        raise ValueError("expected a weight vector")
    return dense_resp_batch(w[None, :], counts)[0]


def top_l_resp_from_weights(w, L, counts=None):
    """Best responsibilities with at most L non-zero entries.

    The support is the L largest weights (ties to the smaller index); values
    are the softmax of the weights restricted to that support.
    """
    w = _as_weights(w)
    if w.ndim != 1:
        raise ValueError("expected a weight vector")
    s = top_l_resp_batch(w[None, :], L, counts)
    return SparseResp(s.values[0], s.indices[0], s.K)


def densify(s):
    """Dense vector (or matrix, for a batch) with zeros off the support."""
    if s.values.ndim == 1:
        out = np.zeros(s.K)
        out[s.indices] = s.values
        return out
    out = np.zeros((s.values.shape[0], s.K))
    np.put_along_axis(out, s.indices, s.values, axis=1)
    return out


def total_variation(a, b):
    """Half the L1 distance between two responsibility vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return 0.5 * float(np.abs(a - b).sum())


def _xlogx(r):
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = r[pos] * np.log(r[pos])
    return out


def entropy(r):
    """-sum r log r over the support (0 log 0 = 0).

    A 2-D input (dense matrix or batched SparseResp) gives one value per row.
    """
    vals = r.values if isinstance(r, SparseResp) else np.asarray(r, dtype=np.float64)
    h = -_xlogx(vals).sum(axis=-1)
    return float(h) if np.ndim(h) == 0 else h
