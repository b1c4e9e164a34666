import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsparse.special import (DomainError, NotSPDError, c_dir, c_wish, digamma, log_det_spd, log_gamma,
                             log_multivariate_gamma)

EULER = 0.5772156649015329

# reference values computed with mpmath at 30 digits
DIGAMMA_REF = {
    1e-6: -1000000.5772140200139199563751,
    1e-3: -1000.57557193181027965475671066,
    0.005: -200.569020911344378668181985749,
    0.3: -3.50252422220013312491535114755,
    1.7: 0.208547874873493921453350106544,
    5.9: 1.68781942590795818182656210466,
    6.1: 1.72408796042853800903342413376,
    50.0: 3.90198967342789219695395970288,
    1e6: 13.8155100579641907707746154031,
}


def test_digamma_known_constants():
    assert digamma(1.0) == pytest.approx(-EULER, abs=1e-12)
    assert digamma(2.0) == pytest.approx(1 - EULER, abs=1e-12)


@pytest.mark.parametrize("a, ref", sorted(DIGAMMA_REF.items()))
def test_digamma_matches_high_precision(a, ref):
    assert abs(digamma(a) - ref) <= 1e-10 * max(1.0, abs(ref) * 1e-6)


def test_digamma_small_argument_regime():
    # psi(alpha/K) for alpha = 0.5, K = 100
    assert -201.0 <= digamma(0.005) <= -199.5


def test_digamma_vectorised_shape():
    a = np.array([[1.0, 2.0], [0.5, 3.0]])
    out = digamma(a)
    assert out.shape == a.shape
    assert out[0, 0] == pytest.approx(-EULER)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_digamma_domain(bad):
    with pytest.raises(DomainError):
        digamma(bad)


@settings(max_examples=1000, deadline=None)
@given(st.floats(1e-4, 1e4))
def test_digamma_recurrence(a):
    assert abs(digamma(a + 1) - digamma(a) - 1 / a) <= 1e-9 * max(1.0, 1 / a * 1e-4)


@settings(max_examples=1000, deadline=None)
@given(st.floats(1e-4, 1e4))
def test_log_gamma_recurrence(a):
    assert abs(log_gamma(a + 1) - log_gamma(a) - math.log(a)) <= 1e-9 * max(1.0, abs(log_gamma(a)) * 1e-3)


def test_log_gamma_values():
    assert log_gamma(1.0) == 0.0
    assert log_gamma(0.5) == pytest.approx(0.5723649429247001, rel=1e-12)
    assert log_gamma(10.0) == pytest.approx(12.8018274800814696112, rel=1e-12)
    with pytest.raises(DomainError):
        log_gamma(0.0)


def test_log_multivariate_gamma():
    assert log_multivariate_gamma(1.0, 1) == pytest.approx(0.0, abs=1e-15)
    assert log_multivariate_gamma(0.5, 1) == pytest.approx(0.5723649429247001, rel=1e-12)
    # ln Gamma_2(2) = (2*1/4) ln pi + ln Gamma(2) + ln Gamma(1.5)
    assert log_multivariate_gamma(2.0, 2) == pytest.approx(0.451582705289454864726, rel=1e-12)
    with pytest.raises(DomainError):
        log_multivariate_gamma(0.5, 2)


def test_c_dir():
    assert c_dir([1.0, 1.0, 1.0]) == pytest.approx(math.log(2))
    assert c_dir([1.0, 1.0]) == pytest.approx(0.0, abs=1e-15)
    assert c_dir([0.5, 0.5, 0.5]) == pytest.approx(-1.83787706640934548356, rel=1e-12)
    assert c_dir([3.7]) == 0.0
    with pytest.raises(DomainError):
        c_dir([1.0, 0.0])


def test_c_dir_rows():
    out = c_dir(np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]]))
    np.testing.assert_allclose(out, [math.log(2)] * 2)


def test_c_wish_values():
    assert c_wish(1.0, [[1.0]]) == pytest.approx(-0.918938533204672741780, rel=1e-12)
    assert c_wish(3.0, np.eye(2)) == pytest.approx(-2.53102424696929079298, rel=1e-12)
    assert c_wish(1.0, [[2.0]]) == pytest.approx(-1.26551212348464539649, rel=1e-12)


def test_c_wish_errors():
    with pytest.raises(DomainError):
        c_wish(0.5, np.eye(2))
    with pytest.raises(NotSPDError):
        c_wish(3.0, [[1.0, 2.0], [2.0, 1.0]])


def test_log_det_spd():
    assert log_det_spd(np.eye(3)) == 0.0
    assert log_det_spd([[4.0]]) == pytest.approx(math.log(4))
    assert log_det_spd([[2.0, 1.0], [1.0, 2.0]]) == pytest.approx(math.log(3), rel=1e-12)
    with pytest.raises(NotSPDError):
        log_det_spd([[0.0, 1.0], [1.0, 0.0]])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_log_det_from_random_factor(D, seed):
    rng = np.random.default_rng(seed)
    L = np.tril(rng.normal(size=(D, D)), -1) + np.diag(rng.uniform(0.5, 2.0, D))
    assert log_det_spd(L @ L.T) == pytest.approx(2 * np.log(np.diag(L)).sum(), rel=1e-10, abs=1e-10)
