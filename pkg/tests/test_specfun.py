import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings, strategies as st

from ymheat.errors import DomainError
from ymheat.specfun import bessel_i, bessel_i_reduced, bessel_i_scaled, bessel_j, bessel_j_zeros

X = np.concatenate([[0.0, 1e-8, 1e-3], np.geomspace(0.01, 700.0, 300)])


@pytest.mark.parametrize("nu", [0.0, 1.0, 2.0, 2.5, 3.0])
def test_scaled_i_matches_scipy(backend, nu):
    ref = sp.ive(nu, X)
    got = bessel_i_scaled(nu, X)
    mask = ref > 0
    assert np.max(np.abs(got[mask] - ref[mask]) / ref[mask]) < 1e-12
    assert np.all(got[~mask] == 0.0)


@pytest.mark.parametrize("nu", [0.0, 1.0, 2.0])
def test_unscaled_i_matches_scipy(backend, nu):
    x = np.linspace(0.0, 50.0, 101)
    ref = sp.iv(nu, x)
    got = bessel_i(nu, x)
    assert np.allclose(got, ref, rtol=1e-12, atol=0)


def test_reduced_i_is_finite_at_zero(backend):
    # (x/2)^-nu I_nu(x) -> 1/Gamma(nu+1)
    v = bessel_i_reduced(2.0, np.array([0.0, 1e-10]))
    assert np.allclose(v, 0.5, rtol=1e-14)


@pytest.mark.parametrize("nu", [0.0, 1.0, 2.0])
def test_j_matches_scipy(backend, nu):
    x = np.linspace(0.0, 200.0, 401)
    assert np.max(np.abs(bessel_j(nu, x) - sp.jv(nu, x))) < 1e-12


def test_j_zeros():
    z = bessel_j_zeros(2.0, 30)
    assert np.allclose(z, sp.jn_zeros(2, 30), rtol=1e-13)
    assert np.max(np.abs(sp.jv(2, z))) < 1e-12


def test_rejects_bad_input():
    with pytest.raises(DomainError):
        bessel_i_scaled(2.0, np.array([-1.0]))
    with pytest.raises(DomainError):
        bessel_j_zeros(-1.0, 3)
    assert bessel_j_zeros(2.0, 0).size == 0


@settings(max_examples=60, deadline=None)
@given(nu=st.sampled_from([1.0, 2.0, 3.0]), x=st.floats(0.05, 500.0))
def test_i_recurrence(nu, x):
    # I_{nu-1} - I_{nu+1} = (2 nu / x) I_nu
    a, b, c = (bessel_i_scaled(v, np.array([x]))[0] for v in (nu - 1, nu, nu + 1))
    assert abs(a - c - 2 * nu / x * b) <= 1e-11 * max(abs(a), 1e-300)


@settings(max_examples=60, deadline=None)
@given(nu=st.sampled_from([1.0, 2.0, 3.0]), x=st.floats(0.05, 150.0))
def test_j_recurrence(nu, x):
    a, b, c = (bessel_j(v, np.array([x]))[0] for v in (nu - 1, nu, nu + 1))
    assert abs(a + c - 2 * nu / x * b) <= 1e-11 * (abs(a) + abs(b) + abs(c)) + 1e-14
