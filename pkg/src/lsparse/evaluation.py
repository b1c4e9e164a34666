"""Heldout scoring, responsibility distance diagnostics and the timing harness."""
import time
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .corpus import Corpus
from .counters import OpCounts
from .data import completion_split
from .lda import LocalStepConfig, local_step_batch
from .resp import SparseResp, densify
from .special import LOG2PI, cholesky, log_det_from_chol

__all__ = [
    "HeldoutReport",
    "mixture_heldout",
    "CompletionSplits",
    "make_completion_splits",
    "doc_completion_score",
    "distance_cdf",
    "bench",
]


@dataclass
class HeldoutReport:
    """Average heldout log-likelihood (nats per observation or per token)."""

    score: float
    n_units: float
    elapsed_sec: float
    n_skipped: int = 0

    def as_row(self):
        return {"score": self.score, "n_units": self.n_units,
                "elapsed_sec": self.elapsed_sec, "n_skipped": self.n_skipped}


def mixture_log_predictive(X, g):
    """ln sum_k pi_k N(x | 0, Sigma_k) per row, plug-in point estimates."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    pi = g.theta.mean()
    D = X.shape[1]
    out = np.empty((X.shape[0], g.K))
    for k, post in enumerate(g.obs):
        if not post.nu > D + 1:
            raise ValueError(f"cluster {k}: E[Sigma] undefined for nu={post.nu} <= D+1={D + 1}")
        Sigma = post.expected_cov()
        L = cholesky(Sigma)
        Z = np.linalg.solve(L, X.T) if D > 0 else X.T
        out[:, k] = (np.log(pi[k]) - 0.5 * D * LOG2PI - 0.5 * log_det_from_chol(L)
                     - 0.5 * np.einsum("ij,ij->j", Z, Z))
    return logsumexp(out, axis=1)


def mixture_heldout(X, g):
    """Mean heldout log density under pi_hat = E[pi], Sigma_hat = E[Sigma]."""
    t0 = time.perf_counter()
    lp = mixture_log_predictive(X, g)
    return HeldoutReport(float(lp.mean()), float(lp.size), time.perf_counter() - t0)


@dataclass
class CompletionSplits:
    """Per-document (A, B) word-type splits; documents with < 2 types are skipped."""

    part_a: Corpus
    part_b: Corpus
    kept: np.ndarray
    n_skipped: int


def make_completion_splits(corpus, frac_a=0.8, seed=0):
    rng = np.random.default_rng(seed)
    a_docs, b_docs, kept = [], [], []
    for d in range(corpus.n_docs):
        split = completion_split(corpus[d], frac_a, rng)
        if split is None:
            continue
        a_docs.append(split[0])
        b_docs.append(split[1])
        kept.append(d)
    return CompletionSplits(Corpus.from_documents(a_docs, corpus.V), Corpus.from_documents(b_docs, corpus.V),
                            np.array(kept, dtype=np.int64), corpus.n_docs - len(kept))


@dataclass(eq=False)
class _PointTopics:
    """Fixed topic-word probabilities in the layout the local step expects."""

    C: np.ndarray
    alpha: float

    @property
    def K(self):
        return self.C.shape[1]

    @property
    def V(self):
        return self.C.shape[0]


def doc_completion_score(splits, topics, alpha, cfg=None):
    """Document-completion heldout score in nats per token of part B.

    Parameters
    ----------
    splits : CompletionSplits or Corpus
        A Corpus is split with seed 0.
    topics : ndarray, shape (K, V)
        Row-stochastic topic-word probabilities phi_hat (e.g. posterior means).
    alpha : float
    cfg : LocalStepConfig, optional
        Iteration settings; the dense local step is always used on part A.
    """
    t0 = time.perf_counter()
    if isinstance(splits, Corpus):
        splits = make_completion_splits(splits)
    phi = np.asarray(topics, dtype=np.float64)
    if np.any(phi <= 0):
        raise ValueError("topic-word probabilities must be strictly positive")
    cfg = LocalStepConfig() if cfg is None else cfg
    from dataclasses import replace

    cfg = replace(cfg, L=None, restarts=False)
    g = _PointTopics(np.ascontiguousarray(np.log(phi).T), float(alpha))
    res = local_step_batch(splits.part_a, g, cfg)
    pi = res.theta / res.theta.sum(axis=1, keepdims=True)
    B = splits.part_b
    doc_of = np.repeat(np.arange(B.n_docs), np.diff(B.doc_ptr))
    # p(v | doc) = sum_k pi_dk phi_kv for each B word type
    pred = np.einsum("tk,kt->t", pi[doc_of], phi[:, B.word_ids])
    total = float(np.sum(B.counts * np.log(pred)))
    n_tok = B.n_tokens
    return HeldoutReport(total / n_tok, n_tok, time.perf_counter() - t0, splits.n_skipped)


def total_variation_rows(A, B):
    return 0.5 * np.abs(A - B).sum(axis=1)


def distance_cdf(dense, other):
    """Sorted total-variation distances between aligned rows.

    `dense` is an (N, K) matrix of responsibilities (or document-topic counts);
    `other` is a SparseResp batch or another (N, K) matrix.  Rows are
    normalised to sum to one first, so count vectors can be passed directly.
    """
    A = np.asarray(dense, dtype=np.float64)
    Bm = densify(other) if isinstance(other, SparseResp) else np.asarray(other, dtype=np.float64)
    if A.shape != Bm.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {Bm.shape}")
    A = A / A.sum(axis=1, keepdims=True)
    Bm = Bm / Bm.sum(axis=1, keepdims=True)
    return np.sort(total_variation_rows(A, Bm))


def _median_time(fn, repeats):
    times = []
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), out


def bench(X, g, Ls, repeats=5):
    """Median wall time of each mixture substep for every L (None = dense).

    Returns a list of rows {substep, L, K, wall_sec, exp_calls}.
    """
    from .mixture import compute_weights, global_step, summary_step
    from .resp import dense_resp_batch, top_l_resp_batch

    rows = []
    K = g.K
    W = compute_weights(X, g)
    t_w, _ = _median_time(lambda: compute_weights(X, g), repeats)
    for L in Ls:
        counts = OpCounts()
        if L is None or L == K:
            fn = lambda: dense_resp_batch(W)  # noqa: E731
            dense_resp_batch(W, counts)
        else:
            fn = lambda L=L: top_l_resp_batch(W, L)  # noqa: E731
            top_l_resp_batch(W, L, counts)
        t_r, resp = _median_time(fn, repeats)
        t_s, stats = _median_time(lambda: summary_step(X, resp, g.family), repeats)
        t_g, _ = _median_time(lambda: global_step(stats, g.alpha, g.family), repeats)
        label = "dense" if L is None else L
        rows += [
            {"substep": "weights", "L": label, "K": K, "wall_sec": t_w, "exp_calls": 0},
            {"substep": "resp", "L": label, "K": K, "wall_sec": t_r, "exp_calls": counts.exp_calls},
            {"substep": "summary", "L": label, "K": K, "wall_sec": t_s, "exp_calls": 0},
            {"substep": "global", "L": label, "K": K, "wall_sec": t_g, "exp_calls": 0},
        ]
    return rows


def bench_lda(corpus, g, Ls, repeats=5, cfg=None):
    """Median wall time of the LDA local iterations and summary for every L."""
    from dataclasses import replace

    from .lda import lda_summary

    cfg = LocalStepConfig() if cfg is None else cfg
    rows = []
    for L in Ls:
        c = replace(cfg, L=L)
        counts = OpCounts()
        local_step_batch(corpus, g, c, counts=counts)
        t_l, res = _median_time(lambda: local_step_batch(corpus, g, c), repeats)
        t_s, _ = _median_time(lambda: lda_summary(res), repeats)
        label = "dense" if L is None else L
        rows += [
            {"substep": "local-iterations", "L": label, "K": g.K, "wall_sec": t_l, "exp_calls": counts.exp_calls},
            {"substep": "summary", "L": label, "K": g.K, "wall_sec": t_s, "exp_calls": 0},
        ]
    return rows
