"""Conjugate observation models: zero-mean Gaussian with Wishart prior on the
precision, and Categorical with Dirichlet prior.

Posteriors are immutable; every update returns a new object whose cached
expectations are computed once at construction.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .special import (
    LOG2PI,
    c_dir,
    c_wish_from_logdet,
    cholesky,
    digamma,
    expected_log_det_wishart,
    log_det_from_chol,
)
from .resp import SparseResp, densify

__all__ = [
    "WishartPosterior",
    "DirichletPosterior",
    "GaussianWishart",
    "CategoricalDirichlet",
    "gaussian_expected_log_lik",
    "gaussian_global_update",
    "categorical_expected_log_lik",
    "categorical_global_update",
    "l_data_gaussian",
    "l_data_categorical",
]


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class WishartPosterior:
    """q(Phi) = Wishart(nu, Lambda), stored through the inverse scale Lambda^{-1}.

    Cached: Cholesky factor of Lambda^{-1}, E[ln|Phi|] and E[Phi] = nu * Lambda.
    """

    nu: float
    scale_inv: np.ndarray
    chol: np.ndarray
    E_log_det: float
    E_prec: np.ndarray

    @classmethod
    def from_params(cls, nu, scale_inv):
        scale_inv = np.asarray(scale_inv, dtype=np.float64)
        scale_inv = 0.5 * (scale_inv + scale_inv.T)
        D = scale_inv.shape[0]
        if not nu > D - 1:
            raise ValueError(f"degrees of freedom {nu} must exceed D-1={D - 1}")
        chol = cholesky(scale_inv)
        logdet_inv = log_det_from_chol(chol)
        E_prec = nu * cho_solve((chol, True), np.eye(D))
        return cls(
            float(nu),
            _frozen(scale_inv),
            _frozen(chol),
            expected_log_det_wishart(nu, D, logdet_inv),
            _frozen(0.5 * (E_prec + E_prec.T)),
        )

    @property
    def D(self):
        return self.scale_inv.shape[0]

    @property
    def logdet_scale_inv(self):
        return log_det_from_chol(self.chol)

    @property
    def scale(self):
        return cho_solve((self.chol, True), np.eye(self.D))

    def cumulant(self):
        return c_wish_from_logdet(self.nu, self.D, self.logdet_scale_inv)

    def mahalanobis(self, X):
        """x^T E[Phi] x for each row of X, via a triangular solve."""
        Z = solve_triangular(self.chol, np.atleast_2d(X).T, lower=True, check_finite=False)
        return self.nu * np.einsum("ij,ij->j", Z, Z)

    def expected_cov(self):
        """E[Sigma] = Lambda^{-1} / (nu - D - 1), defined for nu > D + 1."""
        if not self.nu > self.D + 1:
            raise ValueError(f"E[Sigma] needs nu > D+1, got nu={self.nu}, D={self.D}")
        return self.scale_inv / (self.nu - self.D - 1)


@dataclass(frozen=True, eq=False)
class DirichletPosterior:
    """q(phi) = Dir(lam); a 2-D `lam` stacks independent Dirichlets by row."""

    lam: np.ndarray
    E_log: np.ndarray

    @classmethod
    def from_params(cls, lam):
        lam = np.asarray(lam, dtype=np.float64)
        if not np.all(lam > 0):
            raise ValueError("Dirichlet parameters must be > 0")
        E_log = digamma(lam) - digamma(lam.sum(axis=-1, keepdims=True))
        return cls(_frozen(lam), _frozen(E_log))

    def mean(self):
        return self.lam / self.lam.sum(axis=-1, keepdims=True)

    def cumulant(self):
        return c_dir(self.lam)


def gaussian_expected_log_lik(x, post):
    """E_q[ln N(x | 0, Phi^{-1})] for one vector x or each row of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    val = -0.5 * post.D * LOG2PI + 0.5 * post.E_log_det - 0.5 * post.mahalanobis(x)
    return float(val[0]) if x.ndim == 1 else val


def gaussian_global_update(N_k, S_k, nu_bar, prior_scale_inv):
    """Conjugate update: nu = nu_bar + N_k, Lambda^{-1} = Lambda_bar^{-1} + S_k."""
    return WishartPosterior.from_params(nu_bar + N_k, np.asarray(prior_scale_inv) + np.asarray(S_k))


def categorical_expected_log_lik(v, post):
    """E_q[ln phi_v] = psi(lam_v) - psi(sum lam), read from the cache."""
    if post.lam.ndim != 1:
        raise ValueError("expected a single Dirichlet posterior")
    if not 0 <= v < post.lam.shape[0]:
        raise IndexError(f"word id {v} outside [0, {post.lam.shape[0]})")
    return float(post.E_log[v])


def categorical_global_update(S, lambda_bar):
    """Conjugate update lam_v = lambda_bar + S_v (row-wise for a 2-D S)."""
    if not lambda_bar > 0:
        raise ValueError("lambda_bar must be > 0")
    return DirichletPosterior.from_params(lambda_bar + np.asarray(S, dtype=np.float64))


def l_data_gaussian(N, S, nu_bar, prior_scale_inv, posts):
    """Data term of the ELBO for a zero-mean Gaussian / Wishart mixture.

    The residual pairings vanish right after a conjugate update, leaving
    -(N D / 2) ln 2pi + sum_k [c_Wish(prior) - c_Wish(post_k)].
    """
    N = np.asarray(N, dtype=np.float64)
    if N.size == 0:
        return 0.0
    D = np.asarray(prior_scale_inv).shape[0]
    c_prior = c_wish_from_logdet(nu_bar, D, log_det_from_chol(cholesky(prior_scale_inv)))
    total = -0.5 * N.sum() * D * LOG2PI
    for k, post in enumerate(posts):
        total += c_prior - post.cumulant()
        total += 0.5 * (N[k] + nu_bar - post.nu) * post.E_log_det
        resid = S[k] + prior_scale_inv - post.scale_inv
        total -= 0.5 * float(np.sum(resid * post.E_prec))
    return float(total)


def l_data_categorical(S, lambda_bar, post):
    """Data term for Categorical / Dirichlet: prior-minus-posterior cumulants
    plus the (S + lambda_bar - lam) E[ln phi] residual."""
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    if S.size == 0:
        return 0.0
    lam = np.atleast_2d(post.lam)
    E_log = np.atleast_2d(post.E_log)
    K, V = S.shape
    total = K * c_dir(np.full(V, lambda_bar)) - float(np.sum(c_dir(lam)))
    total += float(np.sum((S + lambda_bar - lam) * E_log))
    return float(total)


class GaussianWishart:
    """Zero-mean full-covariance Gaussian likelihood with a Wishart prior.

    Parameters
    ----------
    nu_bar : float
        Prior degrees of freedom, > D - 1.
    prior_scale_inv : ndarray, shape (D, D)
        Inverse prior scale Lambda_bar^{-1}; E_prior[Phi] = nu_bar * Lambda_bar.
    """

    name = "gauss"

    def __init__(self, nu_bar, prior_scale_inv):
        prior_scale_inv = np.asarray(prior_scale_inv, dtype=np.float64)
        self.D = prior_scale_inv.shape[0]
        if not nu_bar > self.D - 1:
            raise ValueError(f"nu_bar must exceed D-1={self.D - 1}")
        cholesky(prior_scale_inv)
        self.nu_bar = float(nu_bar)
        self.prior_scale_inv = prior_scale_inv

    @classmethod
    def default_prior(cls, X, nu_bar=None, max_rows=10000):
        """nu_bar = D + 2 and Lambda_bar^{-1} = nu_bar * (second moment of X)."""
        X = np.asarray(X, dtype=np.float64)
        D = X.shape[1]
        nu_bar = D + 2.0 if nu_bar is None else float(nu_bar)
        step = max(1, X.shape[0] // max_rows)
        sub = X[::step]
        second = sub.T @ sub / sub.shape[0]
        # keep the prior SPD even for degenerate (e.g. mean-removed) data
        second += 1e-6 * max(np.trace(second) / D, 1e-12) * np.eye(D)
        return cls(nu_bar, nu_bar * second)

    def validate(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.D:
            raise ValueError(f"expected observations of dimension {self.D}")
        return X

    def zero_stat(self, K):
        return np.zeros((K, self.D, self.D))

    def stat(self, X, resp):
        if isinstance(resp, SparseResp):
            if resp.L == resp.K:
                return self._stat_dense(X, densify(resp))
            return self._stat_sparse(X, resp)
        return self._stat_dense(X, resp)

    def _stat_dense(self, X, R):
        K = R.shape[1]
        S = np.empty((K, self.D, self.D))
        for k in range(K):
            S[k] = (X * R[:, k, None]).T @ X
        return 0.5 * (S + S.transpose(0, 2, 1))

    def _stat_sparse(self, X, resp):
        N, L = resp.values.shape
        flat_k = resp.indices.ravel()
        order = np.argsort(flat_k, kind="stable")
        rows = np.repeat(np.arange(N), L)[order]
        weights = resp.values.ravel()[order]
        bounds = np.searchsorted(flat_k[order], np.arange(resp.K + 1))
        S = np.zeros((resp.K, self.D, self.D))
        for k in range(resp.K):
            a, b = bounds[k], bounds[k + 1]
            if a == b:
                continue
            Xs = X[rows[a:b]]
            S[k] = (Xs * weights[a:b, None]).T @ Xs
        return 0.5 * (S + S.transpose(0, 2, 1))

    def posteriors(self, N, S):
        return [gaussian_global_update(N[k], S[k], self.nu_bar, self.prior_scale_inv) for k in range(len(N))]

    def expected_log_lik(self, X, posts):
        out = np.empty((X.shape[0], len(posts)))
        for k, post in enumerate(posts):
            out[:, k] = gaussian_expected_log_lik(X, post)
        return out

    def l_data(self, N, S, posts):
        return l_data_gaussian(N, S, self.nu_bar, self.prior_scale_inv, posts)

    def interpolate(self, current, target, rho):
        """Convex combination in natural coordinates (nu, Lambda^{-1})."""
        return [
            WishartPosterior.from_params(
                (1 - rho) * c.nu + rho * t.nu, (1 - rho) * c.scale_inv + rho * t.scale_inv
            )
            for c, t in zip(current, target)
        ]

    def to_arrays(self, posts):
        return {
            "nu": np.array([p.nu for p in posts]),
            "scale_inv": np.stack([p.scale_inv for p in posts]),
            "prior_nu": np.array([self.nu_bar]),
            "prior_scale_inv": self.prior_scale_inv,
        }

    @classmethod
    def from_arrays(cls, arrays):
        fam = cls(float(arrays["prior_nu"][0]), arrays["prior_scale_inv"])
        posts = [WishartPosterior.from_params(nu, B) for nu, B in zip(arrays["nu"], arrays["scale_inv"])]
        return fam, posts


class CategoricalDirichlet:
    """Single-token categorical likelihood with a symmetric Dirichlet prior.

    Observations are integer word ids in [0, V).
    """

    name = "cat"

    def __init__(self, lambda_bar, V):
        if not lambda_bar > 0:
            raise ValueError("lambda_bar must be > 0")
        self.lambda_bar = float(lambda_bar)
        self.V = int(V)

    def validate(self, X):
        X = np.asarray(X)
        if X.ndim != 1 or not np.issubdtype(X.dtype, np.integer):
            raise ValueError("categorical observations must be a 1-D integer array")
        if X.size and (X.min() < 0 or X.max() >= self.V):
            raise ValueError(f"word ids must lie in [0, {self.V})")
        return X.astype(np.int64)

    def zero_stat(self, K):
        return np.zeros((K, self.V))

    def stat(self, X, resp):
        if isinstance(resp, SparseResp):
            S = np.zeros((resp.K, self.V))
            cols = np.broadcast_to(X[:, None], resp.indices.shape)
            np.add.at(S, (resp.indices, cols), resp.values)
            return S
        K = resp.shape[1]
        S = np.zeros((K, self.V))
        for k in range(K):
            S[k] = np.bincount(X, weights=resp[:, k], minlength=self.V)
        return S

    def posteriors(self, N, S):
        return categorical_global_update(S, self.lambda_bar)

    def expected_log_lik(self, X, posts):
        return posts.E_log[:, X].T

    def l_data(self, N, S, posts):
        return l_data_categorical(S, self.lambda_bar, posts)

    def interpolate(self, current, target, rho):
        return DirichletPosterior.from_params((1 - rho) * current.lam + rho * target.lam)

    def to_arrays(self, posts):
        return {"lam": posts.lam, "prior_lambda": np.array([self.lambda_bar])}

    @classmethod
    def from_arrays(cls, arrays):
        lam = arrays["lam"]
        return cls(float(arrays["prior_lambda"][0]), lam.shape[1]), DirichletPosterior.from_params(lam)
