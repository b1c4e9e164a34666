"""Variational inference for finite Dirichlet mixtures.

q(pi) = Dir(theta), q(phi_k) from a conjugate family, q(z_n) = Cat(r_n) with
r_n dense or restricted to L non-zero entries.
"""
from dataclasses import dataclass

import numpy as np

from .expfam import DirichletPosterior
from .resp import SparseResp, dense_resp_batch, entropy, top_l_resp_batch
from .special import c_dir

__all__ = [
    "DENSE",
    "MixGlobalState",
    "MixSuffStats",
    "compute_weights",
    "local_step",
    "summary_step",
    "global_step",
    "l_alloc",
    "elbo",
    "elbo_terms",
]

DENSE = None


@dataclass(eq=False)
class MixGlobalState:
    """Frequencies posterior Dir(theta) plus one observation posterior per cluster.

    `obs` is a list of WishartPosterior for the Gaussian family, or a stacked
    DirichletPosterior for the categorical family.
    """

    theta: DirichletPosterior
    obs: object
    family: object
    alpha: float

    @property
    def K(self):
        return self.theta.lam.size

    @property
    def E_log_pi(self):
        return self.theta.E_log


@dataclass(eq=False)
class MixSuffStats:
    """Per-cluster expected counts N, data statistics S, observation count and
    the summed responsibility entropy (so the objective needs no stored resps)."""

    N: np.ndarray
    S: np.ndarray
    count_obs: float
    entropy: float

    @classmethod
    def zeros(cls, K, family):
        return cls(np.zeros(K), family.zero_stat(K), 0.0, 0.0)

    def __add__(self, other):
        return MixSuffStats(self.N + other.N, self.S + other.S,
                            self.count_obs + other.count_obs, self.entropy + other.entropy)

    def __sub__(self, other):
        return MixSuffStats(self.N - other.N, self.S - other.S,
                            self.count_obs - other.count_obs, self.entropy - other.entropy)

    def scaled(self, c):
        return MixSuffStats(c * self.N, c * self.S, c * self.count_obs, c * self.entropy)

    def zeros_like(self):
        return MixSuffStats(np.zeros_like(self.N), np.zeros_like(self.S), 0.0, 0.0)


def compute_weights(X, g):
    """W[n, k] = E[ln pi_k] + E[ln F(x_n | phi_k)].

    A single observation (1-D Gaussian vector or scalar word id) gives a
    length-K vector; a batch gives an (N, K) matrix.
    """
    single = (g.family.name == "gauss" and np.ndim(X) == 1) or (g.family.name == "cat" and np.ndim(X) == 0)
    Xb = np.atleast_1d(X)[None, :] if (single and g.family.name == "gauss") else np.atleast_1d(X)
    W = g.family.expected_log_lik(Xb, g.obs) + g.E_log_pi[None, :]
    return W[0] if single else W


def local_step(X, g, L=DENSE, counts=None):
    """Optimal responsibilities for a batch: dense, or top-L per observation."""
    W = compute_weights(X, g)
    if W.ndim == 1:
        W = W[None, :]
    if L is DENSE:
        return dense_resp_batch(W, counts)
    if not 1 <= L <= g.K:
        raise ValueError(f"L must satisfy 1 <= L <= K={g.K}, got {L}")
    return top_l_resp_batch(W, L, counts)


def summary_step(X, resp, family):
    """Sufficient statistics of a batch; sparse resps touch only their supports."""
    if isinstance(resp, SparseResp):
        N = np.bincount(resp.indices.ravel(), weights=resp.values.ravel(), minlength=resp.K)
        n_obs = resp.values.shape[0]
    else:
        N = resp.sum(axis=0)
        n_obs = resp.shape[0]
    S = family.stat(X, resp)
    H = entropy(resp)
    return MixSuffStats(N.astype(np.float64), S, float(n_obs), float(np.sum(H)))


def global_step(stats, alpha, family):
    """theta_k = alpha/K + N_k and conjugate updates of every cluster posterior."""
    K = stats.N.size
    theta = DirichletPosterior.from_params(alpha / K + stats.N)
    return MixGlobalState(theta, family.posteriors(stats.N, stats.S), family, float(alpha))


def l_alloc(N, theta, alpha):
    """c_Dir(alpha/K) - c_Dir(theta) + sum_k (N_k + alpha/K - theta_k) E[ln pi_k]."""
    K = theta.lam.size
    return (c_dir(np.full(K, alpha / K)) - c_dir(theta.lam)
            + float(np.sum((N + alpha / K - theta.lam) * theta.E_log)))


def elbo_terms(stats, g):
    return {
        "alloc": l_alloc(stats.N, g.theta, g.alpha),
        "entropy": stats.entropy,
        "data": g.family.l_data(stats.N, stats.S, g.obs),
    }


def elbo(stats, g):
    """Evidence lower bound evaluated from summary statistics and the global state."""
    return float(sum(elbo_terms(stats, g).values()))


def interpolate(current, target, rho):
    """Convex combination of two global states in natural coordinates."""
    theta = DirichletPosterior.from_params((1 - rho) * current.theta.lam + rho * target.theta.lam)
    return MixGlobalState(theta, current.family.interpolate(current.obs, target.obs, rho),
                          current.family, current.alpha)
