"""Scalar and matrix special functions used by every expectation and ELBO term.

digamma is implemented here (recurrence plus asymptotic series) because the
local step for topic models evaluates it at arguments near 0.005 where the
value is about -200 and must stay accurate.  log-gamma defers to the C
library / scipy.
"""
import math

import numpy as np
from numba import njit
from scipy.special import gammaln

LOG2 = math.log(2.0)
LOGPI = math.log(math.pi)
LOG2PI = math.log(2.0 * math.pi)

# Bernoulli-number coefficients B_2n / (2n) of the asymptotic digamma series
_ASYMPTOTIC = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
)
_C1, _C2, _C3, _C4, _C5, _C6, _C7, _C8 = _ASYMPTOTIC


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class NotSPDError(np.linalg.LinAlgError):
    """Matrix is not symmetric positive definite (Cholesky failed)."""


@njit(cache=True, nogil=True)
def _split(a):
    t = 134217729.0 * a  # 2^27 + 1
    hi = t - (t - a)
    return hi, a - hi


@njit(cache=True, nogil=True)
def _residual(q, x):
    """1 - q*x computed without rounding error in the product."""
    p = q * x
    qh, ql = _split(q)
    xh, xl = _split(x)
    err = ((qh * xh - p) + qh * xl + ql * xh) + ql * xl
    return (1.0 - p) - err


@njit(cache=True, nogil=True)
def digamma_scalar(x):
    """psi(x) for x > 0.  No argument checking; NaN for x <= 0."""
    if not x > 0.0:
        return np.nan
    # the 1/x term dominates for tiny x: keep its rounding error (Dekker
    # product) and subtract the rounded part last
    lead = 0.0
    lead_err = 0.0
    if x < 6.0:
        lead = 1.0 / x
        lead_err = _residual(lead, x) / x
        x += 1.0
    acc = 0.0
    while x < 6.0:
        acc -= 1.0 / x
        x += 1.0
    r = 1.0 / (x * x)
    series = r * (_C1 + r * (_C2 + r * (_C3 + r * (_C4 + r * (_C5 + r * (_C6 + r * (_C7 + r * _C8)))))))
    return (acc + math.log(x) - 0.5 / x - series - lead_err) - lead


@njit(cache=True, nogil=True)
def _digamma_array(a, out):
    flat_a = a.ravel()
    flat_out = out.ravel()
    for i in range(flat_a.size):
        flat_out[i] = digamma_scalar(flat_a[i])
    return out


def digamma(a):
    """Digamma function psi(a) = d/da log Gamma(a).

    Parameters
    ----------
    a : float or array_like
        Strictly positive argument(s).

    Returns
    -------
    float or ndarray
        Same shape as `a`.

    Raises
    ------
    DomainError
        If any entry is <= 0 or NaN.
    """
    arr = np.asarray(a, dtype=np.float64)
    if not np.all(arr > 0):
        raise DomainError("digamma requires a > 0")
    if arr.ndim == 0:
        return digamma_scalar(float(arr))
    out = np.empty_like(arr)
    return _digamma_array(np.ascontiguousarray(arr), out)


def log_gamma(a):
    """ln Gamma(a) for a > 0 (scalar or array)."""
    arr = np.asarray(a, dtype=np.float64)
    if not np.all(arr > 0):
        raise DomainError("log_gamma requires a > 0")
    if arr.ndim == 0:
        return math.lgamma(float(arr))
    return gammaln(arr)


def log_multivariate_gamma(a, D):
    """ln Gamma_D(a) = D(D-1)/4 ln(pi) + sum_{d=1..D} ln Gamma(a + (1-d)/2)."""
    D = int(D)
    if D < 1:
        raise DomainError("dimension must be a positive integer")
    if not a > 0.5 * (D - 1):
        raise DomainError(f"log_multivariate_gamma requires a > (D-1)/2, got a={a}, D={D}")
    terms = a + 0.5 * (1 - np.arange(1, D + 1))
    return 0.25 * D * (D - 1) * LOGPI + float(gammaln(terms).sum())


def c_dir(a):
    """Log normaliser of the Dirichlet: ln Gamma(sum a) - sum ln Gamma(a_k).

    A 2-D input is treated as a stack of Dirichlets (one per row) and returns
    one value per row.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 0 or a.shape[-1] == 0:
        raise DomainError("c_dir needs a non-empty parameter vector")
    if not np.all(a > 0):
        raise DomainError("Dirichlet parameters must be > 0")
    out = gammaln(a.sum(axis=-1)) - gammaln(a).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def cholesky(M):
    """Lower Cholesky factor of an SPD matrix; the single SPD entry point."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSPDError(f"expected a square matrix, got shape {M.shape}")
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError("matrix is not symmetric positive definite") from exc


def log_det_from_chol(chol):
    return 2.0 * float(np.log(np.diag(chol)).sum())


def log_det_spd(M):
    """ln|M| for symmetric positive-definite M, via Cholesky."""
    return log_det_from_chol(cholesky(M))


def c_wish_from_logdet(nu, D, logdet_scale_inv):
    """Wishart log normaliser given ln|Lambda^{-1}| directly."""
    return -0.5 * nu * D * LOG2 - log_multivariate_gamma(0.5 * nu, D) + 0.5 * nu * logdet_scale_inv


def c_wish(nu, Lambda):
    """Wishart log normaliser.

    ``-(nu D / 2) ln 2 - ln Gamma_D(nu / 2) + (nu / 2) ln|Lambda^{-1}|`` where
    Lambda is the scale matrix (E[Phi] = nu * Lambda).
    """
    Lambda = np.atleast_2d(np.asarray(Lambda, dtype=np.float64))
    D = Lambda.shape[0]
    if not nu > D - 1:
        raise DomainError(f"Wishart degrees of freedom must exceed D-1={D - 1}, got {nu}")
    logdet_inv = -log_det_from_chol(cholesky(Lambda))
    return c_wish_from_logdet(nu, D, logdet_inv)


def expected_log_det_wishart(nu, D, logdet_scale_inv):
    """E[ln|Phi|] under Wishart(nu, Lambda) given ln|Lambda^{-1}|."""
    args = 0.5 * (nu + 1.0 - np.arange(1, D + 1))
    return float(digamma(args).sum()) + D * LOG2 - logdet_scale_inv
