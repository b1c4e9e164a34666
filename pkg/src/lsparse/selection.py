"""Top-L index selection in O(K) worst case.

Introselect over an index permutation: quickselect with median-of-three
pivots, switching to median-of-medians (groups of 5) once the partition depth
exceeds 2*floor(log2 K) or the elements scanned by quickselect partitions
exceed 3K, whichever comes first.  The work cap keeps inputs that defeat
median-of-three (organ pipes) within a linear comparison budget.  Comparisons use the strict total order
(value descending, index ascending), so ties always resolve toward the
smaller index and the top-L set is unique.
"""
import numpy as np
from numba import njit

__all__ = ["select_top_l", "partition_top_l_inplace", "depth_limit"]


@njit(cache=True, nogil=True, inline="always")
def _ranks_before(values, i, j):
    vi = values[i]
    vj = values[j]
    return vi > vj or (vi == vj and i < j)


@njit(cache=True, nogil=True, inline="always")
def _swap(perm, a, b):
    t = perm[a]
    perm[a] = perm[b]
    perm[b] = t


@njit(cache=True, nogil=True)
def _insertion_sort(perm, values, lo, hi, counter):
    for a in range(lo + 1, hi):
        b = a
        while b > lo:
            counter[0] += 1
            if _ranks_before(values, perm[b], perm[b - 1]):
                _swap(perm, b, b - 1)
                b -= 1
            else:
                break


@njit(cache=True, nogil=True)
def _median_of_three(perm, values, a, b, c, counter):
    counter[0] += 1
    if _ranks_before(values, perm[a], perm[b]):
        counter[0] += 1
        if _ranks_before(values, perm[b], perm[c]):
            return b
        counter[0] += 1
        if _ranks_before(values, perm[a], perm[c]):
            return c
        return a
    counter[0] += 1
    if _ranks_before(values, perm[a], perm[c]):
        return a
    counter[0] += 1
    if _ranks_before(values, perm[b], perm[c]):
        return c
    return b


@njit(cache=True, nogil=True)
def _partition(perm, values, lo, hi, pivot, counter):
    # Lomuto: returns the pivot's final slot; [lo, p) rank before it
    _swap(perm, pivot, hi - 1)
    pv = perm[hi - 1]
    store = lo
    for i in range(lo, hi - 1):
        counter[0] += 1
        if _ranks_before(values, perm[i], pv):
            _swap(perm, i, store)
            store += 1
    _swap(perm, store, hi - 1)
    return store


@njit(cache=True, nogil=True)
def introselect(perm, values, lo, hi, nth, depth, counter):
    """Place the element of rank `nth` at perm[nth], higher ranks before it.

    Operates on perm[lo:hi].  `depth` is the remaining quickselect budget;
    at zero, or once quickselect partitions have scanned 3*(hi-lo) elements,
    every further pivot comes from median-of-medians.
    counter[0] accumulates value comparisons.

    The median-of-medians subproblem is a nested selection; it runs off an
    explicit frame stack rather than recursion.
    """
    # each level shrinks the range by 5x, so 64 frames is far more than needed
    f_lo = np.empty(64, dtype=np.int64)
    f_hi = np.empty(64, dtype=np.int64)
    f_nth = np.empty(64, dtype=np.int64)
    f_piv = np.empty(64, dtype=np.int64)
    sp = 0
    ready = -1
    work = 3 * (hi - lo)
    while True:
        if ready >= 0:
            pivot = ready
            ready = -1
        elif hi - lo <= 5:
            _insertion_sort(perm, values, lo, hi, counter)
            if sp == 0:
                return
            sp -= 1
            lo, hi, nth, ready = f_lo[sp], f_hi[sp], f_nth[sp], f_piv[sp]
            continue
        elif sp == 0 and depth > 0 and work >= hi - lo:
            pivot = _median_of_three(perm, values, lo, lo + (hi - lo) // 2, hi - 1, counter)
            depth -= 1
            work -= hi - lo
        else:
            store = lo
            for g in range(lo, hi, 5):
                e = min(g + 5, hi)
                _insertion_sort(perm, values, g, e, counter)
                _swap(perm, g + (e - g - 1) // 2, store)
                store += 1
            mid = lo + (store - lo - 1) // 2
            f_lo[sp], f_hi[sp], f_nth[sp], f_piv[sp] = lo, hi, nth, mid
            sp += 1
            hi = store
            nth = mid
            continue
        p = _partition(perm, values, lo, hi, pivot, counter)
        if p == nth:
            if sp == 0:
                return
            sp -= 1
            lo, hi, nth, ready = f_lo[sp], f_hi[sp], f_nth[sp], f_piv[sp]
        elif nth < p:
            hi = p
        else:
            lo = p + 1


@njit(cache=True, nogil=True)
def depth_limit(K):
    """2 * floor(log2 K), the quickselect budget before the fallback."""
    d = 0
    while K > 1:
        K >>= 1
        d += 1
    return 2 * d


@njit(cache=True, nogil=True)
def partition_kernel(perm, values, K, L, counter):
    """Partition perm[:K] so perm[:L] holds the top-L indices (unordered)."""
    if L < K:
        introselect(perm, values, 0, K, L - 1, depth_limit(K), counter)


@njit(cache=True, nogil=True)
def sort_block(perm, values, n):
    """Order perm[:n] by (value desc, index asc); not counted as selection work."""
    if n <= 16:
        dummy = np.zeros(1, dtype=np.int64)
        _insertion_sort(perm, values, 0, n, dummy)
        return
    block = np.sort(perm[:n])
    keys = np.empty(n)
    for i in range(n):
        keys[i] = -values[block[i]]
    order = np.argsort(keys, kind="mergesort")
    for i in range(n):
        perm[i] = block[order[i]]


def _check_values(values):
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError("values must be one-dimensional")
    if np.isnan(values).any():
        raise ValueError("values contain NaN")
    return values


def partition_top_l_inplace(index_perm, values, L, counter=None):
    """Rearrange `index_perm` so its first L entries index the L largest values.

    Parameters
    ----------
    index_perm : ndarray of int64, length K
        A permutation of range(K); modified in place.
    values : array_like of float, length K
        Read-only weights.
    L : int
        Size of the leading block, 1 <= L <= K.
    counter : ndarray of int64, shape (1,), optional
        Comparison counter, incremented in place.

    Notes
    -----
    Nothing is ordered inside either block.  Ties go to the smaller index.
    """
    values = _check_values(values)
    K = values.size
    if index_perm.shape != (K,) or index_perm.dtype != np.int64:
        raise ValueError("index_perm must be an int64 array with one entry per value")
    if not 1 <= L <= K:
        raise ValueError(f"L must satisfy 1 <= L <= K={K}, got {L}")
    if counter is None:
        counter = np.zeros(1, dtype=np.int64)
    partition_kernel(index_perm, values, K, int(L), counter)


def select_top_l(values, L, counter=None):
    """Indices of the L largest entries, ordered by (value desc, index asc).

    The input array is not modified.

    >>> select_top_l([3, 1, 4, 1, 5], 2)
    array([4, 2])
    """
    values = _check_values(values)
    K = values.size
    if not 1 <= L <= K:
        raise ValueError(f"L must satisfy 1 <= L <= K={K}, got {L}")
    perm = np.arange(K, dtype=np.int64)
    if counter is None:
        counter = np.zeros(1, dtype=np.int64)
    partition_kernel(perm, values, K, int(L), counter)
    sort_block(perm, values, int(L))
    return perm[:L].copy()
