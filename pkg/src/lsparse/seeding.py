"""k-means++ style initialisation of global states.

The first seed is drawn uniformly; each later seed is drawn with probability
proportional to its divergence from the nearest seed chosen so far.  Units at
zero divergence (duplicates of a chosen seed) can never be picked.
"""
import numpy as np

from .corpus import Corpus
from .lda import LdaGlobalState
from .mixture import MixSuffStats, global_step

__all__ = ["kmeanspp", "seed_rows_euclidean", "seed_docs_kl", "init_mixture", "init_lda"]


def kmeanspp(n_units, K, divergence_to, rng, n_trials=None):
    """Greedy D^2-style seeding.

    Each new seed is chosen among `n_trials` candidates sampled with
    probability proportional to their divergence from the nearest existing
    seed; the candidate leaving the smallest total divergence wins.  The
    default of 2 + floor(ln K) trials follows common k-means++ practice;
    n_trials=1 is the plain sampler.

    Parameters
    ----------
    n_units : int
    K : int
    divergence_to : callable
        divergence_to(j) returns an (n_units,) array of divergences of every
        unit from unit j.
    rng : numpy.random.Generator
    n_trials : int, optional
    """
    if not 1 <= K <= n_units:
        raise ValueError(f"cannot choose K={K} seeds from {n_units} units")
    if n_trials is None:
        n_trials = 2 + int(np.log(K))
    seeds = [int(rng.integers(n_units))]
    best = np.maximum(divergence_to(seeds[0]), 0.0)
    best[seeds] = 0.0
    for _ in range(1, K):
        total = best.sum()
        if total > 0:
            cands = rng.choice(n_units, size=n_trials, p=best / total)
        else:
            # every remaining unit duplicates a seed; fall back to uniform over the rest
            cands = [int(rng.choice(np.setdiff1d(np.arange(n_units), seeds)))]
        pick, pick_best, pick_total = None, None, np.inf
        for j in cands:
            cand = np.minimum(best, np.maximum(divergence_to(int(j)), 0.0))
            cand[j] = 0.0
            if cand.sum() < pick_total:
                pick, pick_best, pick_total = int(j), cand, cand.sum()
        seeds.append(pick)
        best = pick_best
        best[seeds] = 0.0
    return np.array(seeds, dtype=np.int64)


def seed_rows_euclidean(X, K, rng):
    """Seed rows of X by squared Euclidean distance."""
    X = np.asarray(X, dtype=np.float64)
    sq = np.einsum("ij,ij->i", X, X)

    def div(j):
        return sq - 2.0 * (X @ X[j]) + sq[j]

    return kmeanspp(X.shape[0], K, div, rng)


def _doc_distributions(corpus):
    X = corpus.to_csr()
    n = np.asarray(X.sum(axis=1)).ravel()
    P = X.multiply(1.0 / np.maximum(n, 1e-300)[:, None]).tocsr()
    plogp = np.zeros(corpus.n_docs)
    np.add.at(plogp, np.repeat(np.arange(corpus.n_docs), np.diff(P.indptr)), P.data * np.log(P.data))
    return X, P, plogp


def _smoothed(rows, smoothing, V):
    Q = np.asarray(rows.todense()) + smoothing
    return Q / Q.sum(axis=1, keepdims=True)


def seed_docs_kl(corpus, K, rng, smoothing):
    """Seed documents by KL(empirical word distribution || smoothed seed distribution)."""
    X, P, plogp = _doc_distributions(corpus)

    def div(j):
        q = _smoothed(X[j], smoothing, corpus.V)[0]
        return plogp - P @ np.log(q)

    return kmeanspp(corpus.n_docs, K, div, rng)


def init_mixture(X, K, family, alpha, rng):
    """Seed K rows, assign every row to its nearest seed, and run one global step.

    Clusters whose hard partition is empty keep prior-valued posteriors.
    """
    X = np.asarray(X, dtype=np.float64)
    seeds = seed_rows_euclidean(X, K, rng)
    C = X[seeds]
    d2 = (np.einsum("ij,ij->i", X, X)[:, None] - 2.0 * X @ C.T + np.einsum("ij,ij->i", C, C)[None, :])
    z = np.argmin(d2, axis=1)
    R = np.zeros((X.shape[0], K))
    R[np.arange(X.shape[0]), z] = 1.0
    stats = MixSuffStats(R.sum(axis=0), family.stat(X, R), float(X.shape[0]), 0.0)
    return global_step(stats, alpha, family), seeds


def init_mixture_categorical(x, K, family, alpha, rng):
    """Seeding for single-token categorical mixtures: seed tokens are distinct word ids."""
    x = family.validate(x)

    def div(j):
        return (x != x[j]).astype(np.float64)

    seeds = kmeanspp(x.size, K, div, rng)
    R = np.zeros((x.size, K))
    for k, j in enumerate(seeds):
        R[x == x[j], k] = 1.0
    R /= np.maximum(R.sum(axis=1, keepdims=True), 1.0)
    missing = R.sum(axis=1) == 0
    R[missing] = 1.0 / K
    stats = MixSuffStats(R.sum(axis=0), family.stat(x, R), float(x.size), 0.0)
    return global_step(stats, alpha, family), seeds


def init_lda(corpus, K, alpha, lambda_bar, rng):
    """Seed K documents, give every document to its KL-nearest seed, and set
    lam_k = lambda_bar + word counts of the documents in cell k."""
    if not isinstance(corpus, Corpus):
        raise TypeError("init_lda expects a Corpus")
    seeds = seed_docs_kl(corpus, K, rng, lambda_bar)
    X, P, _ = _doc_distributions(corpus)
    logQ = np.log(_smoothed(X[seeds], lambda_bar, corpus.V))
    z = np.asarray(P @ logQ.T).argmax(axis=1)
    z[seeds] = np.arange(K)
    lam = np.full((K, corpus.V), lambda_bar)
    for k in range(K):
        lam[k] += np.asarray(X[z == k].sum(axis=0)).ravel()
    return LdaGlobalState.from_lam(lam, alpha, lambda_bar), seeds
