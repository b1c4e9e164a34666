"""scikit-learn style estimators wrapping the training drivers."""
import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils import check_array, check_random_state
from sklearn.utils.validation import check_is_fitted

from .corpus import Corpus
from .expfam import GaussianWishart
from .lda import LocalStepConfig, local_step_batch
from .mixture import compute_weights, local_step
from .resp import densify
from .seeding import init_lda, init_mixture
from .train import LdaTask, LearningRateSchedule, MixtureTask, run

__all__ = ["SparseGaussianMixture", "SparseLDA"]


def _check_L(L, K):
    if L is None or (isinstance(L, str) and L.lower() == "dense"):
        return None
    L = int(L)
    if not 1 <= L <= K:
        raise ValueError(f"L must satisfy 1 <= L <= n_components={K}, got {L}")
    return L


def _seed_of(random_state):
    return int(check_random_state(random_state).randint(2**31 - 1))


class SparseGaussianMixture(ClusterMixin, BaseEstimator):
    """Bayesian Gaussian mixture (Dirichlet weights, zero-mean Wishart precisions)
    fitted with L-sparse responsibilities.

    Parameters
    ----------
    n_components : int
    L : int or "dense"
        Non-zero responsibilities per observation during training.
    alg : {"mvi", "svi", "full"}
    batches, laps : int
    alpha : float
        Symmetric Dirichlet concentration on the mixture weights (total mass).
    nu_bar : float, optional
        Wishart prior degrees of freedom; defaults to D + 2.
    delta, kappa : float
        SVI learning-rate schedule.
    random_state : int, RandomState or None

    Attributes
    ----------
    state_ : MixGlobalState
    trace_ : Trace
    weights_, covariances_ : ndarray
    """

    def __init__(self, n_components=10, L="dense", alg="mvi", batches=1, laps=10, alpha=10.0,
                 nu_bar=None, delta=1.0, kappa=0.55, random_state=None):
        self.n_components = n_components
        self.L = L
        self.alg = alg
        self.batches = batches
        self.laps = laps
        self.alpha = alpha
        self.nu_bar = nu_bar
        self.delta = delta
        self.kappa = kappa
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        K = int(self.n_components)
        if K > X.shape[0]:
            raise ValueError(f"n_components={K} exceeds n_samples={X.shape[0]}")
        L = _check_L(self.L, K)
        rng = np.random.default_rng(_seed_of(self.random_state))
        family = GaussianWishart.default_prior(X, self.nu_bar)
        g0, _ = init_mixture(X, K, family, self.alpha, rng)
        task = MixtureTask(X, family, self.alpha, L)
        self.trace_ = run(task, g0, self.alg, self.batches, self.laps,
                          LearningRateSchedule(self.delta, self.kappa), seed=int(rng.integers(2**31 - 1)))
        self.state_ = self.trace_.state
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def weights_(self):
        check_is_fitted(self, "state_")
        return self.state_.theta.mean()

    @property
    def covariances_(self):
        check_is_fitted(self, "state_")
        return np.stack([p.expected_cov() for p in self.state_.obs])

    def _validate(self, X):
        check_is_fitted(self, "state_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def predict_proba(self, X):
        """Responsibilities; L-sparse rows when the estimator was fitted with integer L."""
        X = self._validate(X)
        r = local_step(X, self.state_, _check_L(self.L, self.state_.K))
        return densify(r) if not isinstance(r, np.ndarray) else r

    transform = predict_proba

    def predict(self, X):
        return np.argmax(compute_weights(self._validate(X), self.state_), axis=1)

    def score(self, X, y=None):
        """Mean heldout log density per observation."""
        from .evaluation import mixture_heldout

        return mixture_heldout(self._validate(X), self.state_).score


class SparseLDA(TransformerMixin, BaseEstimator):
    """Latent Dirichlet allocation with L-sparse token responsibilities.

    Input is a document-term count matrix (dense or scipy.sparse) or a Corpus.

    Parameters
    ----------
    n_components : int
    L : int or "dense"
    alg : {"mvi", "svi", "full"}
    batches, laps : int
    alpha : float
        Total Dirichlet concentration on document-topic weights (alpha/K each).
    lambda_bar : float
        Topic-word smoothing.
    max_local_iters, conv_threshold, eps_active : local-step controls
    restarts, warm_start : bool
    random_state : int, RandomState or None

    Attributes
    ----------
    state_ : LdaGlobalState
    components_ : ndarray, shape (n_components, n_words)
        Posterior-mean topic-word distributions.
    trace_ : Trace
    """

    def __init__(self, n_components=10, L="dense", alg="mvi", batches=1, laps=10, alpha=0.5,
                 lambda_bar=0.1, max_local_iters=100, conv_threshold=0.05, eps_active=1e-8,
                 restarts=True, warm_start=False, delta=1.0, kappa=0.55, random_state=None):
        self.n_components = n_components
        self.L = L
        self.alg = alg
        self.batches = batches
        self.laps = laps
        self.alpha = alpha
        self.lambda_bar = lambda_bar
        self.max_local_iters = max_local_iters
        self.conv_threshold = conv_threshold
        self.eps_active = eps_active
        self.restarts = restarts
        self.warm_start = warm_start
        self.delta = delta
        self.kappa = kappa
        self.random_state = random_state

    @staticmethod
    def _as_corpus(X):
        if isinstance(X, Corpus):
            return X
        X = check_array(X, accept_sparse="csr")
        if sp.issparse(X):
            if X.data.size and (X.data.min() < 0 or np.any(X.data != np.round(X.data))):
                raise ValueError("document-term counts must be non-negative integers")
        elif X.size and (X.min() < 0 or np.any(X != np.round(X))):
            raise ValueError("document-term counts must be non-negative integers")
        return Corpus.from_csr(sp.csr_matrix(X))

    def _cfg(self, L):
        return LocalStepConfig(L=L, max_iters=self.max_local_iters, conv_threshold=self.conv_threshold,
                               eps_active=self.eps_active, restarts=self.restarts)

    def fit(self, X, y=None):
        corpus = self._as_corpus(X)
        K = int(self.n_components)
        if K > corpus.n_docs:
            raise ValueError(f"n_components={K} exceeds the {corpus.n_docs} documents")
        L = _check_L(self.L, K)
        rng = np.random.default_rng(_seed_of(self.random_state))
        g0, _ = init_lda(corpus, K, self.alpha, self.lambda_bar, rng)
        task = LdaTask(corpus, self.alpha, self.lambda_bar, self._cfg(L), warm_start=self.warm_start)
        self.trace_ = run(task, g0, self.alg, self.batches, self.laps,
                          LearningRateSchedule(self.delta, self.kappa), seed=int(rng.integers(2**31 - 1)))
        self.state_ = self.trace_.state
        self.n_features_in_ = corpus.V
        return self

    @property
    def components_(self):
        check_is_fitted(self, "state_")
        return self.state_.topic_means()

    def transform(self, X):
        """Normalized document-topic weights theta_d / sum(theta_d) from a dense local step."""
        check_is_fitted(self, "state_")
        corpus = self._as_corpus(X)
        if corpus.V != self.n_features_in_:
            raise ValueError(f"X has {corpus.V} words, expected {self.n_features_in_}")
        theta = local_step_batch(corpus, self.state_, self._cfg(None)).theta
        return theta / theta.sum(axis=1, keepdims=True)

    def score(self, X, y=None, seed=0):
        """Document-completion log predictive per heldout token."""
        from .evaluation import doc_completion_score, make_completion_splits

        check_is_fitted(self, "state_")
        splits = make_completion_splits(self._as_corpus(X), seed=seed)
        return doc_completion_score(splits, self.components_, self.state_.alpha, self._cfg(None)).score
