"""LDA local step (dense and L-sparse with active sets), restart proposals,
topic global step and the LDA objective.

Responsibilities are shared by word type within a document: each unique type
u carries one responsibility vector weighted by its count c_u.  Per-type
responsibilities are stored as (idx, vals, nsup) rows: the first nsup[u]
entries of idx[u] / vals[u] hold the support and its values.  The dense step
uses the same layout with every row holding all K topics.
"""
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .corpus import Corpus, Document
from .counters import OpCounts, new_scratch
from .expfam import DirichletPosterior, l_data_categorical
from .resp import SparseResp, densify
from .selection import partition_kernel, sort_block
from .special import c_dir, digamma_scalar

__all__ = [
    "DENSE",
    "Document",
    "DocState",
    "LdaGlobalState",
    "LdaSuffStats",
    "LocalStepConfig",
    "dense_step_for_doc",
    "l_sparse_step_for_doc",
    "restart_proposal",
    "doc_objective",
    "local_step_batch",
    "lda_summary",
    "lda_global_step",
    "lda_elbo",
]

DENSE = None


@dataclass(frozen=True)
class LocalStepConfig:
    """Per-document iteration settings.

    `L` is an int or DENSE (None).  With `select_always` off, selection runs on
    iterations 1..`select_first` and every `select_every`-th after that.
    """

    L: int | None = DENSE
    max_iters: int = 100
    conv_threshold: float = 0.05
    eps_active: float = 1e-8
    select_first: int = 5
    select_every: int = 10
    select_always: bool = False
    restarts: bool = False
    max_restart_proposals: int = 5
    restart_forward_iters: int = 2

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.conv_threshold > 0:
            raise ValueError("conv_threshold must be > 0")
        if self.eps_active < 0:
            raise ValueError("eps_active must be >= 0")
        if self.L is not None and self.L < 1:
            raise ValueError("L must be >= 1 or DENSE")
        if self.select_first < 0 or self.select_every < 1:
            raise ValueError("invalid selection schedule")
        if self.max_restart_proposals < 0 or self.restart_forward_iters < 0:
            raise ValueError("restart settings must be >= 0")


@dataclass(eq=False)
class LdaGlobalState:
    """Topic posteriors q(phi_k) = Dir(lam_k) and the cached V x K table C."""

    topics: DirichletPosterior
    alpha: float
    lambda_bar: float

    def __post_init__(self):
        # C[v, k] = E[ln phi_kv], laid out for per-token row access
        self.C = np.ascontiguousarray(self.topics.E_log.T)

    @classmethod
    def from_lam(cls, lam, alpha, lambda_bar):
        return cls(DirichletPosterior.from_params(lam), float(alpha), float(lambda_bar))

    @property
    def K(self):
        return self.topics.lam.shape[0]

    @property
    def V(self):
        return self.topics.lam.shape[1]

    def topic_means(self):
        return self.topics.mean()


@dataclass(eq=False)
class LdaSuffStats:
    """Summary of a set of documents.

    S[k, v] is the expected count of word v assigned to topic k.  `doc_terms`
    holds the sum over documents of the allocation and entropy terms, which
    depend only on local parameters, so the objective can be evaluated from
    statistics alone.
    """

    S: np.ndarray
    n_docs: float
    n_tokens: float
    doc_terms: float

    @classmethod
    def zeros(cls, K, V):
        return cls(np.zeros((K, V)), 0.0, 0.0, 0.0)

    @property
    def N(self):
        return self.S.sum(axis=1)

    def __add__(self, other):
        return LdaSuffStats(self.S + other.S, self.n_docs + other.n_docs,
                            self.n_tokens + other.n_tokens, self.doc_terms + other.doc_terms)

    def __sub__(self, other):
        return LdaSuffStats(self.S - other.S, self.n_docs - other.n_docs,
                            self.n_tokens - other.n_tokens, self.doc_terms - other.doc_terms)

    def scaled(self, c):
        return LdaSuffStats(c * self.S, c * self.n_docs, c * self.n_tokens, c * self.doc_terms)

    def zeros_like(self):
        return LdaSuffStats.zeros(*self.S.shape)


@dataclass(eq=False)
class DocState:
    """Local parameters of one document after a local step."""

    idx: np.ndarray
    vals: np.ndarray
    nsup: np.ndarray
    N: np.ndarray
    theta: np.ndarray
    active: np.ndarray
    n_iters: int
    converged: bool
    objective: float
    restart_deltas: np.ndarray = None
    restart_accepted: np.ndarray = None

    @property
    def K(self):
        return self.N.size

    def resp(self, u):
        """Responsibility of word type u as a SparseResp over its support."""
        m = self.nsup[u]
        return SparseResp(self.vals[u, :m].copy(), self.idx[u, :m].copy(), self.K)

    def dense_resp(self):
        R = np.zeros((self.idx.shape[0], self.K))
        for u in range(R.shape[0]):
            m = self.nsup[u]
            R[u, self.idx[u, :m]] = self.vals[u, :m]
        return R


# ---------------------------------------------------------------------------
# numba kernels

@njit(cache=True, nogil=True)
def _softmax_row(w, n, out, scratch):
    mx = -np.inf
    for j in range(n):
        if w[j] > mx:
            mx = w[j]
    tot = 0.0
    for j in range(n):
        e = math.exp(w[j] - mx)
        out[j] = e
        tot += e
    scratch[0] += n
    for j in range(n):
        out[j] /= tot


@njit(cache=True, nogil=True)
def _dense_doc(C, wids, cnts, a_k, warm, N_init, max_iters, thr, idx, vals, nsup, N, scratch):
    U = wids.size
    K = C.shape[1]
    P = np.empty(K)
    w = np.empty(K)
    N_old = np.empty(K)
    for u in range(U):
        nsup[u] = K
        for k in range(K):
            idx[u, k] = k
    if warm:
        N[:] = N_init
    else:
        N[:] = 0.0
        for u in range(U):
            _softmax_row(C[wids[u]], K, vals[u], scratch)
            for k in range(K):
                N[k] += cnts[u] * vals[u, k]
    it = 0
    converged = False
    while it < max_iters:
        it += 1
        for k in range(K):
            P[k] = digamma_scalar(N[k] + a_k)
        N_old[:] = N
        N[:] = 0.0
        for u in range(U):
            row = C[wids[u]]
            for k in range(K):
                w[k] = row[k] + P[k]
            _softmax_row(w, K, vals[u], scratch)
            for k in range(K):
                N[k] += cnts[u] * vals[u, k]
        delta = 0.0
        for k in range(K):
            d = abs(N[k] - N_old[k])
            if d > delta:
                delta = d
        if delta < thr:
            converged = True
            break
    return it, converged


@njit(cache=True, nogil=True)
def _select_token(crow, P, act, nA, L, w, perm, idx_row, vals_row, scratch):
    """Top-min(L, |A|) responsibilities for one word type over the active set."""
    for j in range(nA):
        k = act[j]
        w[j] = crow[k] + P[k]
        perm[j] = j
    nl = min(L, nA)
    cmp_counter = scratch[1:2]
    partition_kernel(perm, w, nA, nl, cmp_counter)
    sort_block(perm, w, nl)
    mx = w[perm[0]]
    tot = 0.0
    for j in range(nl):
        e = math.exp(w[perm[j]] - mx)
        vals_row[j] = e
        idx_row[j] = act[perm[j]]
        tot += e
    scratch[0] += nl
    for j in range(nl):
        vals_row[j] /= tot
    return nl


@njit(cache=True, nogil=True)
def _reweight_token(crow, P, m, idx_row, vals_row, scratch):
    """Refresh values on a frozen support of size m."""
    mx = -np.inf
    for j in range(m):
        x = crow[idx_row[j]] + P[idx_row[j]]
        vals_row[j] = x
        if x > mx:
            mx = x
    tot = 0.0
    for j in range(m):
        e = math.exp(vals_row[j] - mx)
        vals_row[j] = e
        tot += e
    scratch[0] += m
    for j in range(m):
        vals_row[j] /= tot


@njit(cache=True, nogil=True)
def _active_list(mask, act):
    nA = 0
    for k in range(mask.size):
        if mask[k]:
            act[nA] = k
            nA += 1
    return nA


@njit(cache=True, nogil=True)
def _sparse_iterate(C, wids, cnts, a_k, L, eps, thr, n_iters, select_first, select_every,
                    select_always, idx, vals, nsup, N, mask, scratch):
    """Run up to n_iters sparse update cycles; returns (iterations, converged)."""
    U = wids.size
    K = C.shape[1]
    act = np.empty(K, dtype=np.int64)
    perm = np.empty(K, dtype=np.int64)
    w = np.empty(K)
    P = np.zeros(K)
    N_old = np.empty(K)
    nA = _active_list(mask, act)
    it = 0
    converged = False
    while it < n_iters:
        it += 1
        select = select_always or it <= select_first or it % select_every == 0
        for j in range(nA):
            P[act[j]] = digamma_scalar(N[act[j]] + a_k)
        N_old[:] = N
        N[:] = 0.0
        for u in range(U):
            crow = C[wids[u]]
            m = 0
            if not select:
                # drop topics that left the active set from the frozen support
                for j in range(nsup[u]):
                    k = idx[u, j]
                    if mask[k]:
                        idx[u, m] = k
                        vals[u, m] = vals[u, j]
                        m += 1
                nsup[u] = m
            if m == 0:
                nsup[u] = _select_token(crow, P, act, nA, L, w, perm, idx[u], vals[u], scratch)
            else:
                _reweight_token(crow, P, m, idx[u], vals[u], scratch)
            for j in range(nsup[u]):
                N[idx[u, j]] += cnts[u] * vals[u, j]
        nA2 = 0
        for j in range(nA):
            k = act[j]
            if N[k] > eps:
                act[nA2] = k
                nA2 += 1
            else:
                mask[k] = False
        nA = nA2
        delta = 0.0
        for k in range(K):
            d = abs(N[k] - N_old[k])
            if d > delta:
                delta = d
        if delta < thr:
            converged = True
            break
    return it, converged


@njit(cache=True, nogil=True)
def _sparse_doc(C, wids, cnts, a_k, L, warm, N_init, max_iters, thr, eps, select_first,
                select_every, select_always, idx, vals, nsup, N, mask, scratch):
    U = wids.size
    K = C.shape[1]
    if warm:
        N[:] = N_init
        for u in range(U):
            nsup[u] = 0
    else:
        act = np.arange(K)
        perm = np.empty(K, dtype=np.int64)
        w = np.empty(K)
        zero = np.zeros(K)
        N[:] = 0.0
        for u in range(U):
            nsup[u] = _select_token(C[wids[u]], zero, act, K, L, w, perm, idx[u], vals[u], scratch)
            for j in range(nsup[u]):
                N[idx[u, j]] += cnts[u] * vals[u, j]
    for k in range(K):
        mask[k] = N[k] > eps
    return _sparse_iterate(C, wids, cnts, a_k, L, eps, thr, max_iters, select_first, select_every,
                           select_always, idx, vals, nsup, N, mask, scratch)


@njit(cache=True, nogil=True)
def _lgamma_sum(theta):
    s = 0.0
    tot = 0.0
    for k in range(theta.size):
        s += math.lgamma(theta[k])
        tot += theta[k]
    return math.lgamma(tot) - s


@njit(cache=True, nogil=True)
def _doc_terms(C, wids, cnts, a_k, idx, vals, nsup, N):
    """(data, entropy, allocation) parts of one document's objective."""
    data = 0.0
    ent = 0.0
    for u in range(wids.size):
        crow = C[wids[u]]
        for j in range(nsup[u]):
            r = vals[u, j]
            if r > 0.0:
                data += cnts[u] * r * crow[idx[u, j]]
                ent -= cnts[u] * r * math.log(r)
    K = N.size
    theta = N + a_k
    c_prior = math.lgamma(K * a_k) - K * math.lgamma(a_k)
    alloc = c_prior - _lgamma_sum(theta)
    return data, ent, alloc


@njit(cache=True, nogil=True)
def _recount(cnts, idx, vals, nsup, N):
    N[:] = 0.0
    for u in range(cnts.size):
        for j in range(nsup[u]):
            N[idx[u, j]] += cnts[u] * vals[u, j]


@njit(cache=True, nogil=True)
def _restart_doc(C, wids, cnts, a_k, L, eps, n_props, n_fwd, idx, vals, nsup, N, mask,
                 deltas, accepted, scratch):
    """Try deleting low-mass active topics one at a time; keep strict improvements."""
    U = wids.size
    K = C.shape[1]
    d0, e0, a0 = _doc_terms(C, wids, cnts, a_k, idx, vals, nsup, N)
    cur = d0 + e0 + a0
    act = np.empty(K, dtype=np.int64)
    nA = 0
    for k in range(K):
        if mask[k] and N[k] > eps:
            act[nA] = k
            nA += 1
    if nA <= 1:
        return cur, 0, 0
    # candidates by increasing mass, ties to the smaller index (stable sort)
    keys = np.empty(nA)
    for j in range(nA):
        keys[j] = N[act[j]]
    order = np.argsort(keys, kind="mergesort")
    n_cand = min(n_props, nA - 1)
    idx2 = np.empty_like(idx)
    vals2 = np.empty_like(vals)
    nsup2 = np.empty_like(nsup)
    N2 = np.empty_like(N)
    mask2 = np.empty_like(mask)
    act2 = np.empty(K, dtype=np.int64)
    perm = np.empty(K, dtype=np.int64)
    w = np.empty(K)
    P = np.zeros(K)
    n_tried = 0
    n_acc = 0
    for c in range(n_cand):
        kill = act[order[c]]
        if not mask[kill]:
            continue
        n_active = 0
        for k in range(K):
            if mask[k]:
                n_active += 1
        if n_active <= 1:
            break
        idx2[:] = idx
        vals2[:] = vals
        nsup2[:] = nsup
        mask2[:] = mask
        mask2[kill] = False
        nA2 = _active_list(mask2, act2)
        for j in range(nA2):
            P[act2[j]] = digamma_scalar(N[act2[j]] + a_k)
        for u in range(U):
            m = 0
            tot = 0.0
            for j in range(nsup2[u]):
                k = idx2[u, j]
                if mask2[k]:
                    idx2[u, m] = k
                    vals2[u, m] = vals2[u, j]
                    tot += vals2[u, j]
                    m += 1
            if m == 0 or tot <= 0.0:
                nsup2[u] = _select_token(C[wids[u]], P, act2, nA2, L, w, perm, idx2[u], vals2[u], scratch)
            else:
                nsup2[u] = m
                for j in range(m):
                    vals2[u, j] /= tot
        _recount(cnts, idx2, vals2, nsup2, N2)
        if n_fwd > 0:
            _sparse_iterate(C, wids, cnts, a_k, L, eps, 0.0, n_fwd, n_fwd, 1, True,
                            idx2, vals2, nsup2, N2, mask2, scratch)
        d1, e1, a1 = _doc_terms(C, wids, cnts, a_k, idx2, vals2, nsup2, N2)
        new = d1 + e1 + a1
        deltas[n_tried] = new - cur
        n_tried += 1
        if new > cur:
            accepted[n_tried - 1] = True
            n_acc += 1
            idx[:] = idx2
            vals[:] = vals2
            nsup[:] = nsup2
            N[:] = N2
            mask[:] = mask2
            cur = new
    return cur, n_tried, n_acc


@njit(cache=True, nogil=True)
def _local_batch(C, doc_ptr, wids, cnts, a_k, L, dense, warm, N_init, max_iters, thr, eps,
                 select_first, select_every, select_always, restarts, n_props, n_fwd, restart_eps,
                 idx, vals, nsup, N_out, n_iters, conv, obj_pre, obj, ent, alloc, deltas, accepted,
                 n_tried, scratch):
    K = C.shape[1]
    mask = np.empty(K, dtype=np.bool_)
    for d in range(doc_ptr.size - 1):
        a, b = doc_ptr[d], doc_ptr[d + 1]
        if b == a:
            N_out[d, :] = 0.0
            n_iters[d] = 0
            conv[d] = True
            alloc[d] = 0.0
            continue
        dw = wids[a:b]
        dc = cnts[a:b]
        N = N_out[d]
        if dense:
            it, cv = _dense_doc(C, dw, dc, a_k, warm[d], N_init[d], max_iters, thr,
                                idx[a:b], vals[a:b], nsup[a:b], N, scratch)
            for k in range(K):
                mask[k] = True
        else:
            it, cv = _sparse_doc(C, dw, dc, a_k, L, warm[d], N_init[d], max_iters, thr, eps,
                                 select_first, select_every, select_always,
                                 idx[a:b], vals[a:b], nsup[a:b], N, mask, scratch)
        _recount(dc, idx[a:b], vals[a:b], nsup[a:b], N)
        n_iters[d] = it
        conv[d] = cv
        t_data, t_ent, t_alloc = _doc_terms(C, dw, dc, a_k, idx[a:b], vals[a:b], nsup[a:b], N)
        obj_pre[d] = t_data + t_ent + t_alloc
        if restarts:
            Lr = K if dense else L
            o, nt, na = _restart_doc(C, dw, dc, a_k, Lr, restart_eps, n_props, n_fwd, idx[a:b],
                                     vals[a:b], nsup[a:b], N, mask, deltas[d], accepted[d], scratch)
            n_tried[d] = nt
            t_data, t_ent, t_alloc = _doc_terms(C, dw, dc, a_k, idx[a:b], vals[a:b], nsup[a:b], N)
        obj[d] = t_data + t_ent + t_alloc
        ent[d] = t_ent
        alloc[d] = t_alloc


@njit(cache=True, nogil=True)
def _summary_kernel(doc_ptr, wids, cnts, idx, vals, nsup, S):
    for t in range(wids.size):
        v = wids[t]
        c = cnts[t]
        for j in range(nsup[t]):
            S[idx[t, j], v] += c * vals[t, j]


# ---------------------------------------------------------------------------
# batch-level API

@dataclass(eq=False)
class BatchLocalResult:
    """Local parameters for every document of a corpus slice."""

    corpus: Corpus
    idx: np.ndarray
    vals: np.ndarray
    nsup: np.ndarray
    N: np.ndarray
    n_iters: np.ndarray
    converged: np.ndarray
    objective_pre_restart: np.ndarray
    objective: np.ndarray
    entropy: np.ndarray
    alloc: np.ndarray
    restart_deltas: np.ndarray
    restart_accepted: np.ndarray
    restart_tried: np.ndarray
    a_k: float

    @property
    def theta(self):
        return self.N + self.a_k

    def doc_state(self, d):
        a, b = self.corpus.doc_ptr[d], self.corpus.doc_ptr[d + 1]
        N = self.N[d].copy()
        active = np.flatnonzero(N > 0)
        nt = int(self.restart_tried[d])
        return DocState(self.idx[a:b].copy(), self.vals[a:b].copy(), self.nsup[a:b].copy(), N,
                        N + self.a_k, active, int(self.n_iters[d]), bool(self.converged[d]),
                        float(self.objective[d]), self.restart_deltas[d, :nt].copy(),
                        self.restart_accepted[d, :nt].copy())


def local_step_batch(corpus, g, cfg, warm_counts=None, counts=None):
    """Run the per-document local step over every document of `corpus`.

    Parameters
    ----------
    corpus : Corpus
    g : LdaGlobalState
    cfg : LocalStepConfig
    warm_counts : ndarray, shape (n_docs, K), optional
        Stored document-topic counts; rows containing NaN start cold.
    counts : OpCounts, optional
        Accumulates exp calls, comparisons and restart proposals.
    """
    K = g.K
    if cfg.L is not None and cfg.L > K:
        raise ValueError(f"L={cfg.L} exceeds K={K}")
    if corpus.V != g.V:
        raise ValueError(f"corpus vocabulary {corpus.V} does not match model V={g.V}")
    dense = cfg.L is None
    Lw = K if dense else int(cfg.L)
    D = corpus.n_docs
    T = corpus.word_ids.size
    idx = np.zeros((T, Lw), dtype=np.int64)
    vals = np.zeros((T, Lw))
    nsup = np.zeros(T, dtype=np.int64)
    N = np.zeros((D, K))
    if warm_counts is None:
        warm = np.zeros(D, dtype=np.bool_)
        N_init = np.zeros((D, K))
    else:
        N_init = np.ascontiguousarray(np.nan_to_num(warm_counts, nan=0.0))
        warm = ~np.isnan(warm_counts).any(axis=1)
    n_props = max(int(cfg.max_restart_proposals), 1)
    deltas = np.full((D, n_props), np.nan)
    accepted = np.zeros((D, n_props), dtype=np.bool_)
    tried = np.zeros(D, dtype=np.int64)
    out = [np.zeros(D, dtype=np.int64), np.zeros(D, dtype=np.bool_)] + [np.zeros(D) for _ in range(4)]
    scratch = new_scratch()
    a_k = g.alpha / K
    _local_batch(
        g.C, corpus.doc_ptr, corpus.word_ids, corpus.counts, a_k, Lw, dense, warm, N_init,
        int(cfg.max_iters), float(cfg.conv_threshold), float(cfg.eps_active),
        int(cfg.select_first), int(cfg.select_every), bool(cfg.select_always),
        bool(cfg.restarts and cfg.max_restart_proposals > 0), int(cfg.max_restart_proposals),
        int(cfg.restart_forward_iters), float(cfg.eps_active),
        idx, vals, nsup, N, *out, deltas, accepted, tried, scratch,
    )
    if counts is not None:
        counts.absorb(scratch)
        counts.restart_proposals += int(tried.sum())
        counts.restart_accepts += int(accepted.sum())
    return BatchLocalResult(corpus, idx, vals, nsup, N, *out, deltas, accepted, tried, a_k)


def _single(d, g, cfg, warm_counts=None):
    c = Corpus.from_documents([d], g.V)
    if c.word_ids.size == 0:
        raise ValueError("document has no word types")
    warm = None if warm_counts is None else np.asarray(warm_counts, dtype=np.float64)[None, :]
    return local_step_batch(c, g, cfg, warm), c


def dense_step_for_doc(d, g, cfg=LocalStepConfig(), warm_counts=None):
    """Dense block coordinate ascent for one document; returns a DocState."""
    cfg = _replace(cfg, L=DENSE, restarts=False)
    res, _ = _single(d, g, cfg, warm_counts)
    return res.doc_state(0)


def l_sparse_step_for_doc(d, g, cfg, warm_counts=None):
    """L-sparse local step with active-set tracking for one document."""
    if cfg.L is None:
        raise ValueError("l_sparse_step_for_doc needs an integer L")
    res, _ = _single(d, g, _replace(cfg, restarts=False), warm_counts)
    return res.doc_state(0)


def restart_proposal(state, d, g, cfg):
    """Apply restart proposals to a converged DocState; never lowers the objective.

    Returns a new DocState with `restart_deltas` (objective change of each
    proposal) and `restart_accepted` filled in.
    """
    wids = np.ascontiguousarray(d.word_ids, dtype=np.int64)
    cnts = np.ascontiguousarray(d.counts, dtype=np.float64)
    idx, vals, nsup, N = state.idx.copy(), state.vals.copy(), state.nsup.copy(), state.N.copy()
    mask = np.zeros(g.K, dtype=np.bool_)
    mask[state.active] = True
    n_props = max(int(cfg.max_restart_proposals), 1)
    deltas = np.full(n_props, np.nan)
    accepted = np.zeros(n_props, dtype=np.bool_)
    L = idx.shape[1] if cfg.L is None else int(cfg.L)
    scratch = new_scratch()
    obj, nt, _ = _restart_doc(g.C, wids, cnts, g.alpha / g.K, L, float(cfg.eps_active),
                              int(cfg.max_restart_proposals), int(cfg.restart_forward_iters),
                              idx, vals, nsup, N, mask, deltas, accepted, scratch)
    return DocState(idx, vals, nsup, N, N + g.alpha / g.K, np.flatnonzero(mask & (N > 0)),
                    state.n_iters, state.converged, float(obj), deltas[:nt], accepted[:nt])


def doc_objective(state, d, g):
    """Terms of the objective that depend on one document's local parameters."""
    data, ent, alloc = _doc_terms(g.C, np.ascontiguousarray(d.word_ids, dtype=np.int64),
                                  np.ascontiguousarray(d.counts, dtype=np.float64), g.alpha / g.K,
                                  state.idx, state.vals, state.nsup, state.N)
    return data + ent + alloc


def _replace(cfg, **kw):
    from dataclasses import replace

    return replace(cfg, **kw)


def lda_summary(result, V=None):
    """Sufficient statistics S[k, v] = sum_d sum_u c_du r_duk [v_du = v].

    `result` is a BatchLocalResult, or an iterable of (Document, DocState)
    pairs together with the vocabulary size `V`.  Only supports are visited.
    """
    if isinstance(result, BatchLocalResult):
        c = result.corpus
        S = np.zeros((result.N.shape[1], c.V))
        _summary_kernel(c.doc_ptr, c.word_ids, c.counts, result.idx, result.vals, result.nsup, S)
        return LdaSuffStats(S, float(c.n_docs), c.n_tokens,
                            float(result.entropy.sum() + result.alloc.sum()))
    if V is None:
        raise ValueError("V is required when summarising (document, state) pairs")
    pairs = list(result)
    if not pairs:
        raise ValueError("no documents to summarise; use LdaSuffStats.zeros")
    S = np.zeros((pairs[0][1].K, V))
    n_tokens = 0.0
    doc_terms = 0.0
    for d, st in pairs:
        for u in range(d.n_types):
            m = st.nsup[u]
            S[st.idx[u, :m], d.word_ids[u]] += d.counts[u] * st.vals[u, :m]
        n_tokens += d.n_tokens
        R = st.dense_resp()
        pos = R > 0
        ent = -float(np.sum((d.counts[:, None] * R)[pos] * np.log(R[pos])))
        a_k = float(st.theta[0] - st.N[0])
        doc_terms += ent + c_dir(np.full(st.K, a_k)) - c_dir(st.theta)
    return LdaSuffStats(S, float(len(pairs)), n_tokens, doc_terms)


def lda_global_step(stats, alpha, lambda_bar):
    """lam_kv = lambda_bar + S_kv, with the C table refreshed."""
    if not lambda_bar > 0:
        raise ValueError("lambda_bar must be > 0")
    return LdaGlobalState.from_lam(lambda_bar + stats.S, alpha, lambda_bar)


def lda_elbo(stats, g):
    """Objective from statistics: topic data term plus summed per-document terms.

    Assumes every document's theta was finalized as N + alpha/K, which zeroes
    the allocation residual.
    """
    return l_data_categorical(stats.S, g.lambda_bar, g.topics) + stats.doc_terms
