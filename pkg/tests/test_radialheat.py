import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings, strategies as st

from ymheat.errors import DomainError
from ymheat.grid import RadialGrid
from ymheat.radialheat import duhamel_out, hankel_evolve, heat_evolve, kernel_gamma
from ymheat.suites import kernel_suite


def gaussian(t):
    """Exact 6-D evolution of exp(-r^2) after time t."""
    return lambda r: (1 + 4 * t) ** -3 * np.exp(-np.asarray(r) ** 2 / (1 + 4 * t))


def test_kernel_matches_scipy_formula(backend):
    r, s, t = 1.3, 2.1, 0.7
    ref = r ** -2 * s ** 3 / (2 * t) * math.exp(-(r * r + s * s) / (4 * t)) * sp.iv(2, r * s / (2 * t))
    assert kernel_gamma(6, r, s, t) == pytest.approx(ref, rel=1e-13)


def test_kernel_origin_limit(backend):
    t, s = 0.9, 1.7
    ref = s ** 5 * math.exp(-s * s / (4 * t)) / (64 * t ** 3)
    assert kernel_gamma(6, 0.0, s, t) == pytest.approx(ref, rel=1e-14)


def test_kernel_finite_for_huge_argument(backend):
    v = kernel_gamma(6, 1e4, 1e4 + 1.0, 1e-2)
    assert math.isfinite(v) and v > 0


@settings(max_examples=50, deadline=None)
@given(r=st.floats(0.01, 40.0), s=st.floats(0.01, 40.0), t=st.floats(0.01, 100.0))
def test_detailed_balance(r, s, t):
    lhs = kernel_gamma(6, r, s, t) * r ** 5
    rhs = kernel_gamma(6, s, r, t) * s ** 5
    assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize("r,t", [(0.0, 1.0), (5.0, 0.3), (20.0, 40.0)])
def test_kernel_is_probability_density(backend, r, t):
    v = heat_evolve(lambda s: np.ones_like(s), 0.0, t, [r], epsabs=1e-13, epsrel=1e-13)[0]
    assert v == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("t", [0.01, 0.5, 30.0])
def test_gaussian_closed_form(backend, t):
    r = np.linspace(0.0, 15.0, 31)
    got = heat_evolve(gaussian(0.0), 0.0, t, r, epsabs=1e-300, epsrel=1e-12)
    exact = gaussian(t)(r)
    assert np.max(np.abs(got - exact)) <= 1e-9 * exact.max()


def test_semigroup_property():
    r = np.linspace(0.0, 10.0, 11)
    one_step = heat_evolve(gaussian(0.0), 0.0, 2.0, r, epsabs=1e-300, epsrel=1e-12)
    two_step = heat_evolve(gaussian(0.7), 0.7, 2.0, r, epsabs=1e-300, epsrel=1e-12)
    assert np.allclose(one_step, two_step, rtol=1e-9, atol=0)


def test_profile_output_keeps_grid():
    g = RadialGrid.uniform(5.0, 10)
    out = heat_evolve(gaussian(0.0), 0.0, 1.0, g)
    assert out.grid is g and out.time == 1.0
    assert np.allclose(out.values, gaussian(1.0)(g.nodes), rtol=1e-8)


@settings(max_examples=20, deadline=None)
@given(center=st.floats(0.0, 8.0), width=st.floats(0.2, 3.0), t=st.floats(0.05, 10.0))
def test_positivity_preserved(center, width, t):
    bump = lambda s: np.exp(-((s - center) / width) ** 2)  # noqa: E731
    v = heat_evolve(bump, 0.0, t, np.linspace(0.0, 20.0, 21), epsabs=1e-300, epsrel=1e-10)
    assert np.all(v >= 0)


def test_maximum_principle():
    box = lambda s: np.where(s <= 2.0, 1.0, 0.0)  # noqa: E731
    v = heat_evolve(box, 0.0, 0.5, np.linspace(0.0, 6.0, 25), breakpoints=(2.0,))
    assert np.all(v <= 1.0 + 1e-10) and np.all(v >= -1e-12)


def test_rejects_backward_time():
    with pytest.raises(DomainError):
        heat_evolve(np.cos, 1.0, 1.0, [0.0])
    with pytest.raises(DomainError):
        kernel_gamma(6, 1.0, 1.0, -1.0)
    with pytest.raises(TypeError):
        heat_evolve(3.0, 0.0, 1.0, [0.0])


def test_duhamel_constant_forcing():
    # f = 1 gives t - t0 everywhere
    out = duhamel_out(lambda s, sig: np.ones_like(s), 5.0, 50.0, [0.0, 3.0, 30.0],
                      epsabs=1e-9, epsrel=1e-10)
    assert np.allclose(out, 45.0, rtol=1e-8)


def test_duhamel_zero_forcing():
    out = duhamel_out(lambda s, sig: np.zeros_like(s), 1.0, 10.0, [0.0, 2.0])
    assert np.all(out == 0.0)


def test_duhamel_time_only_forcing():
    # f = sigma: integral is (t^2 - t0^2) / 2
    out = duhamel_out(lambda s, sig: sig, 2.0, 20.0, [1.0], epsabs=1e-8, epsrel=1e-10)
    assert out[0] == pytest.approx((400.0 - 4.0) / 2.0, rel=1e-8)


def test_duhamel_stationary_source_matches_difference():
    # forcing = Laplacian of exp(-r^2) in 6-D; the Duhamel integral of a
    # time-independent source Delta g equals e^{t Delta} g - g
    g = lambda r: np.exp(-r * r)  # noqa: E731
    lap = lambda s, sig: (4 * s * s - 12.0) * np.exp(-s * s)  # noqa: E731
    r = np.array([0.0, 0.5, 1.5])
    out = duhamel_out(lap, 0.0, 1.0, r, epsabs=1e-10, epsrel=1e-10)
    assert np.allclose(out, gaussian(1.0)(r) - g(r), atol=1e-8)


@pytest.mark.parametrize("t", [0.02, 0.3])
def test_hankel_route_agrees(backend, t):
    bump = lambda s: np.where(s < 1.0, (1.0 - np.minimum(s, 1.0) ** 2) ** 4, 0.0)  # noqa: E731
    r = np.linspace(0.0, 2.5, 11)
    direct = heat_evolve(bump, 0.0, t, r, epsabs=1e-13, epsrel=1e-12, breakpoints=(1.0,))
    spectral = hankel_evolve(bump, 1.0, t, r)
    assert np.max(np.abs(direct - spectral)) < 1e-6


def test_kernel_suite_passes():
    checks = kernel_suite()
    assert {c.name for c in checks} >= {"constants_preserved", "detailed_balance",
                                        "gaussian_closed_form", "hankel_cross_check"}
    assert all(c.passed for c in checks), [c.to_dict() for c in checks if not c.passed]
