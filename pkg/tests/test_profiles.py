import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ymheat.errors import ConfigError, DomainError, GridWarning
from ymheat.grid import RadialGrid, RadialProfile, radial_laplacian
from ymheat.profiles import (CutoffSpec, SolitonParams, Theta0Spec, cutoff, envelope_ratio,
                             inner_contribution, inner_linear_apply, inner_radius, lin_potential,
                             nonlinearity_N, nonlinearity_N_expanded, potential, reaction, soliton,
                             soliton_dlam, stationarity_residual, zmode)
from ymheat.quadrature import integrate


def test_soliton_values():
    assert soliton(1.0, 0.0) == 2.0
    assert soliton(SolitonParams(2.0), 2.0) == pytest.approx(0.25)
    with pytest.raises(DomainError):
        SolitonParams(0.0)


def test_soliton_derivative_matches_difference():
    r = np.linspace(0.0, 5.0, 11)
    h = 1e-6
    fd = (soliton(1.0 + h, r) - soliton(1.0 - h, r)) / (2 * h)
    assert np.allclose(soliton_dlam(1.0, r), fd, rtol=1e-8, atol=1e-12)
    # zero mode is the normalised scale derivative
    assert np.allclose(zmode(r), -soliton_dlam(1.0, r) / 4.0, rtol=1e-15)


def test_linear_potential_closed_form():
    rho = np.linspace(0.0, 100.0, 201)
    assert np.allclose(lin_potential(rho), potential(rho), rtol=1e-12, atol=1e-15)
    # large-rho decay 24 rho^-4
    assert lin_potential(1e4) * 1e16 == pytest.approx(24.0, rel=1e-6)


def stationarity_errors(cells_list, r_max=50.0, stretch=4.0):
    return [np.max(np.abs(stationarity_residual(1.0, RadialGrid.from_stretch(r_max, stretch, c).nodes)[:-1]))
            for c in cells_list]


def test_soliton_is_stationary_second_order():
    errs = stationarity_errors([100, 200, 400, 800])
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 1.9


def test_zero_mode_in_kernel_of_linear_operator():
    res = []
    for c in (100, 200, 400, 800):
        g = RadialGrid.from_stretch(50.0, 4.0, c)
        out = inner_linear_apply(RadialProfile(g, zmode(g.nodes)), check=False)
        res.append(np.max(np.abs(out.values[:-1])) / np.max(np.diff(g.nodes)) ** 2)
    assert max(res) / min(res) < 1.5


def test_inner_operator_warns_on_coarse_grid():
    g = RadialGrid.uniform(10.0, 12)
    with pytest.warns(GridWarning):
        inner_linear_apply(RadialProfile(g, zmode(g.nodes)))
    fine = RadialGrid.from_stretch(50.0, 4.0, 3200)
    with warnings.catch_warnings():
        warnings.simplefilter("error", GridWarning)
        inner_linear_apply(RadialProfile(fine, zmode(fine.nodes)))
    with pytest.raises(TypeError):
        inner_linear_apply(zmode)


def test_radial_laplacian_exact_on_quadratic():
    g = RadialGrid.from_stretch(5.0, 2.0, 40)
    # Delta r^2 = 2n in R^n
    assert np.allclose(radial_laplacian(g.nodes ** 2, g.nodes)[:-1], 12.0, rtol=1e-10)


def test_cutoff_shape():
    x = np.linspace(0.0, 3.0, 301)
    v = cutoff(x)
    assert np.all(v[x <= 1] == 1.0) and np.all(v[x >= 2] == 0.0)
    assert np.all(np.diff(v) <= 0)
    h = 1e-6
    for k in (1, 2):
        fd = (cutoff(x + h, k - 1) - cutoff(x - h, k - 1)) / (2 * h)
        # one-sided O(h) error where the second derivative starts at x = 1
        assert np.allclose(cutoff(x, k), fd, atol=1e-4)
    with pytest.raises(ValueError):
        cutoff(x, 3)


def test_cutoff_spec_and_inner_radius():
    R = inner_radius(1e6)
    assert R == pytest.approx(math.log(1e6) ** 0.01)
    spec = CutoffSpec.at_time(1e6)
    assert spec(1.0) == 1.0 and spec(2.5 * R) == 0.0
    with pytest.raises(DomainError):
        CutoffSpec(0.9)
    with pytest.raises(DomainError):
        inner_radius(2.0)


def test_inner_contribution_scaling():
    r = np.array([0.0, 0.5, 1.0])
    v = inner_contribution(lambda rho: np.ones_like(rho), 2.0, r, 3.0)
    assert np.allclose(v, 0.25)


def test_golden_projection_integrals():
    c1 = integrate(lambda r: potential(r) * zmode(r) * r ** 5, 0.0, np.inf, 1e-15, 1e-13)[0]
    assert c1 == pytest.approx(4.0, abs=1e-8)
    m = integrate(lambda r: zmode(r) * r ** 5 / (1 + r * r) ** 2, 0.0, np.inf, 1e-15, 1e-13)[0]
    assert m == pytest.approx(1.0 / 6.0, abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(lam=st.floats(0.1, 10.0), theta=st.floats(-1.0, 1.0), phi=st.floats(-1.0, 1.0),
       psi=st.floats(-1.0, 1.0), r=st.floats(0.0, 20.0))
def test_nonlinearity_forms_agree(lam, theta, phi, psi, r):
    a = nonlinearity_N(lam, theta, phi, psi, r)
    b = nonlinearity_N_expanded(lam, theta, phi, psi, r)
    scale = 1.0 + (1 + r * r) * (abs(theta) + abs(phi) + abs(psi) + soliton(lam, r)) ** 3 * 10
    assert abs(a - b) <= 1e-12 * scale


@settings(max_examples=50, deadline=None)
@given(lam=st.floats(0.1, 10.0), w=st.floats(-1e-3, 1e-3).filter(lambda v: abs(v) > 1e-9),
       r=st.floats(0.0, 10.0))
def test_nonlinearity_is_quadratic(lam, w, r):
    # N(w) / w^2 tends to the second derivative of the reaction at U_lam
    quad = 6.0 - 6.0 * r * r * soliton(lam, r)
    n = nonlinearity_N(lam, w, 0.0, 0.0, r)
    assert abs(n / (w * w) - quad) <= 2 * r * r * abs(w) * (1 + 1e-6) + 1e-6 * (1 + r * r)


def test_reaction_vanishes_on_equator():
    # 6u^2 - 2r^2u^3 = 0 at u = 3/r^2
    r = np.array([1.0, 2.0, 5.0])
    assert np.allclose(reaction(3.0 / r ** 2, r), 0.0, atol=1e-14)


def test_theta0_families_and_aliases():
    assert Theta0Spec("powerlog").family == "PowerLog"
    assert Theta0Spec("oscillatory").family == "OscillatoryExplicit"
    with pytest.raises(DomainError):
        Theta0Spec("nope")
    with pytest.raises(DomainError):
        Theta0Spec(a=1.0)
    with pytest.raises(DomainError):
        Theta0Spec(sign=0)
    with pytest.raises(DomainError):
        Theta0Spec("custom-table")


def test_powerlog_values():
    sp = Theta0Spec("PowerLog", a=0.5, sign=-1, amplitude=2.0)
    r = 3.0
    assert sp(r) == pytest.approx(-2.0 / ((2 + r * r) * math.log(2 + r * r) ** 0.5))
    assert sp.describe() == {"family": "PowerLog", "a": 0.5, "amplitude": 2.0, "sign": "-"}


@pytest.mark.parametrize("spec", [Theta0Spec("PowerLog", 0.3, -1, 2.0), Theta0Spec("oscillatory", 0.5),
                                  Theta0Spec("oscillatory", 0.2, 1, 0.7)])
def test_closed_form_moment(spec):
    for upper in (1.0, 10.0, 300.0):
        q = integrate(lambda s: s * spec(s), 0.0, upper, 1e-14, 1e-13)[0]
        assert spec.moment(upper) == pytest.approx(q, rel=1e-10, abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(x=st.floats(0.0, 50.0), log_t=st.floats(0.0, 30.0))
def test_scaled_matches_direct(x, log_t):
    for spec in (Theta0Spec("PowerLog", 0.5), Theta0Spec("oscillatory", 0.5)):
        t = math.exp(log_t)
        direct = t * spec(math.sqrt(t) * x)
        assert float(spec.scaled(x, log_t)) == pytest.approx(float(direct), rel=1e-9, abs=1e-300)


def test_scaled_survives_huge_time():
    v = Theta0Spec("PowerLog", 0.5).scaled(np.array([0.5, 1.0, 4.0]), 1e3)
    assert np.all(np.isfinite(v)) and np.all(v > 0)
    # x^-2 (log t)^-a behaviour at fixed x
    assert v[1] == pytest.approx(1e3 ** -0.5, rel=1e-3)


def test_from_config():
    spec = Theta0Spec.from_config({"theta0.family": "PowerLog", "theta0.sign": "-", "theta0.a": "0.3"})
    assert spec.sign == -1 and spec.a == 0.3
    with pytest.raises(ConfigError):
        Theta0Spec.from_config({"theta0.sign": "?"})
    with pytest.raises(ConfigError):
        Theta0Spec.from_config({"theta0.a": "2"})


def write_table(path, r, v):
    with open(path, "w") as fh:
        fh.write("r,value\n")
        for a, b in zip(r, v):
            fh.write(f"{float(a)!r},{float(b)!r}\n")


def test_table_datum(tmp_path):
    r = np.linspace(0.0, 40.0, 161)
    ref = Theta0Spec("PowerLog", 0.5)
    p = tmp_path / "t.csv"
    write_table(p, r, ref(r))
    spec = Theta0Spec("custom-table", 0.5, table_path=str(p))
    x = np.array([0.3, 7.7, 39.0])
    assert np.allclose(spec(x), ref(x), rtol=1e-4)
    assert spec(50.0) == 0.0
    assert spec.moment(20.0) == pytest.approx(ref.moment(20.0), rel=1e-5)
    assert spec.breakpoints()[-1] == 40.0
    with pytest.raises(DomainError):
        spec.moment_log(1.0)


def test_table_rejects_slow_tail(tmp_path):
    r = np.concatenate([[0.0], np.geomspace(1.0, 1e4, 200)])
    p = tmp_path / "slow.csv"
    write_table(p, r, 1.0 / (1.0 + r))
    with pytest.raises(DomainError, match="decays slower"):
        Theta0Spec("table", 0.5, table_path=str(p))
    bad = tmp_path / "bad.csv"
    write_table(bad, [1.0, 2.0], [0.0, 0.0])
    with pytest.raises(DomainError):
        Theta0Spec("table", 0.5, table_path=str(bad))


def test_envelope_ratio_bounded_for_powerlog():
    r = np.geomspace(3.0, 1e6, 50)
    rr, env = envelope_ratio(r, Theta0Spec("PowerLog", 0.5)(r), 0.5)
    assert rr.size == 50 and env.max() / env.min() < 2.0
