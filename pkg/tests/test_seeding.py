import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsparse.corpus import Corpus, Document
from lsparse.data import make_gmm_data, make_lda_corpus
from lsparse.expfam import CategoricalDirichlet, GaussianWishart
from lsparse.seeding import (init_lda, init_mixture, init_mixture_categorical, kmeanspp, seed_docs_kl,
                             seed_rows_euclidean)


def test_k1_is_one_uniform_draw():
    X = np.arange(10.0)[:, None]
    picks = [int(seed_rows_euclidean(X, 1, np.random.default_rng(s))[0]) for s in range(400)]
    counts = np.bincount(picks, minlength=10)
    assert counts.min() > 20
    assert int(seed_rows_euclidean(X, 1, np.random.default_rng(7))[0]) == int(np.random.default_rng(7).integers(10))


def test_duplicates_are_never_reselected():
    X = np.repeat(np.array([[0.0, 0.0], [5.0, 1.0], [-3.0, 2.0]]), 4, axis=0)
    for s in range(50):
        seeds = seed_rows_euclidean(X, 3, np.random.default_rng(s))
        assert len({tuple(X[j]) for j in seeds}) == 3


def test_fallback_when_all_remaining_units_duplicate_a_seed():
    X = np.zeros((5, 2))
    seeds = seed_rows_euclidean(X, 3, np.random.default_rng(0))
    assert len(set(seeds.tolist())) == 3


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 10), st.sampled_from([1, None]))
def test_seeds_distinct_and_deterministic(seed, K, trials):
    X = np.random.default_rng(seed).normal(size=(30, 3))

    def div(j):
        return ((X - X[j]) ** 2).sum(axis=1)

    a = kmeanspp(30, K, div, np.random.default_rng(seed), trials)
    b = kmeanspp(30, K, div, np.random.default_rng(seed), trials)
    np.testing.assert_array_equal(a, b)
    assert len(set(a.tolist())) == K


def test_k_exceeds_units():
    with pytest.raises(ValueError):
        seed_rows_euclidean(np.zeros((3, 1)), 4, np.random.default_rng(0))


def test_plain_sampler_probabilities():
    # with one trial the second seed is drawn proportional to squared distance
    X = np.array([[0.0], [1.0], [3.0]])
    hits = np.zeros(3)
    for s in range(3000):
        rng = np.random.default_rng(s)
        seeds = kmeanspp(3, 2, lambda j: (X[:, 0] - X[j, 0]) ** 2, rng, n_trials=1)
        if seeds[0] == 0:
            hits[seeds[1]] += 1
    frac = hits / hits.sum()
    np.testing.assert_allclose(frac, [0, 0.1, 0.9], atol=0.03)


def test_init_mixture_partition():
    rng = np.random.default_rng(0)
    X = make_gmm_data(200, 2, 3, rng)[0]
    fam = GaussianWishart.default_prior(X)
    g, seeds = init_mixture(X, 3, fam, 10.0, np.random.default_rng(1))
    assert g.K == 3 and seeds.size == 3
    assert g.theta.lam.sum() == pytest.approx(10.0 + 200)
    for k, j in enumerate(seeds):
        assert g.theta.lam[k] >= 10.0 / 3 + 1
    g2, seeds2 = init_mixture(X, 3, fam, 10.0, np.random.default_rng(1))
    np.testing.assert_array_equal(seeds, seeds2)
    np.testing.assert_array_equal(g.theta.lam, g2.theta.lam)


def test_init_mixture_categorical_seeds_distinct_words():
    x = np.array([0, 0, 0, 1, 1, 2, 2, 2, 2])
    fam = CategoricalDirichlet(0.1, 3)
    g, seeds = init_mixture_categorical(x, 3, fam, 1.0, np.random.default_rng(0))
    assert sorted(x[seeds].tolist()) == [0, 1, 2]
    np.testing.assert_allclose(np.sort(g.theta.lam), np.sort([3 + 1 / 3, 2 + 1 / 3, 4 + 1 / 3]))


def test_seed_docs_kl_prefers_distinct_documents():
    docs = [Document(np.array([0, 1]), np.array([5.0, 5.0]))] * 5 + [Document(np.array([3, 4]), np.array([4.0, 6.0]))]
    c = Corpus.from_documents(docs, 5)
    for s in range(20):
        seeds = seed_docs_kl(c, 2, np.random.default_rng(s), 0.1)
        assert 5 in seeds.tolist()


def test_init_lda_cells():
    corpus, _ = make_lda_corpus(3, 20, 30, 25, np.random.default_rng(0))
    g, seeds = init_lda(corpus, 3, 0.5, 0.1, np.random.default_rng(2))
    assert g.K == 3 and g.V == 20
    np.testing.assert_allclose(g.topics.lam.sum(), 0.1 * 60 + corpus.n_tokens)
    assert np.all(g.topics.lam >= 0.1)
    for k, d in enumerate(seeds):
        doc = corpus[int(d)]
        assert np.all(g.topics.lam[k, doc.word_ids] >= 0.1 + doc.counts - 1e-12)
    with pytest.raises(TypeError):
        init_lda(np.zeros((3, 3)), 2, 0.5, 0.1, np.random.default_rng(0))
