import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ymheat.errors import DomainError, PreconditionError
from ymheat.profiles import Theta0Spec
from ymheat.quadrature import integrate
from ymheat.radialheat import heat_evolve
from ymheat.scalinglaw import (ModulationTrace, ThetaStarGauge, band_residual, classify_regime,
                               decompose_I, fit_envelope, fubini_check, i1_bracket,
                               identity_first, identity_second, integral_identities_check,
                               integrate_modulation, lambda0_anchor, lambda0_closed_form,
                               law_main_term, mode_moment, mode_norm, modulation_rhs,
                               orthogonality_integral, orthogonality_lhs, projection_constant,
                               solve_rate, summary_json, tau_of_t)

POWERLOG = Theta0Spec("PowerLog", 0.5)
OSC = Theta0Spec("oscillatory", 0.5)


def zero(r):
    return np.zeros_like(np.asarray(r, dtype=float))


# -- constants and closed forms ----------------------------------------------

def test_projection_constants():
    assert projection_constant() == pytest.approx(4.0, abs=1e-10)
    assert mode_moment() == pytest.approx(1.0 / 6.0, abs=1e-12)


def test_mode_norm_closed_form():
    R = 2.5
    q = integrate(lambda r: r ** 5 / (1 + r * r) ** 4, 0.0, 4 * R, 1e-15, 1e-14)[0]
    assert mode_norm(R) == pytest.approx(4 * q, rel=1e-13)
    assert mode_norm(1e8) == pytest.approx(2.0 / 3.0, rel=1e-12)


def test_lambda0_closed_form_examples():
    v = lambda0_closed_form(ell=math.exp(math.pi), a=0.5)
    assert v == pytest.approx(0.75 * math.exp(math.pi / 2), rel=1e-14)
    assert v == pytest.approx(3.6079, abs=1e-4)
    assert math.exp(v) == pytest.approx(36.9, abs=0.05)
    assert lambda0_closed_form(ell=math.exp(math.pi / 2), a=0.5) == pytest.approx(0.0, abs=1e-14)
    assert lambda0_closed_form(100.0, 0.5) + lambda0_anchor(0.5, 100.0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        lambda0_closed_form(5.0, 0.5, t0=10.0)


def test_lambda0_records():
    # running max / min over log log(2+t) in [pi, 6 pi]
    a = 0.5
    ell = np.exp(np.linspace(math.pi, 6 * math.pi, 20001))
    v = lambda0_closed_form(ell=ell, a=a)
    target = 0.75 * math.exp((1 - a) * 5 * math.pi) * 0.9
    assert v.max() > target and v.min() < -target


def test_gauge():
    g = ThetaStarGauge(0.5)
    assert g(math.e ** 2) == pytest.approx(math.e ** -2 / math.sqrt(2))
    with pytest.raises(DomainError):
        ThetaStarGauge(0.0)


# -- orthogonality -------------------------------------------------------------

def test_orthogonality_trivial():
    assert orthogonality_lhs(1.0, 0.0, lambda r, t: zero(r), 3.0, 100.0) == 0.0
    assert orthogonality_lhs(1.0, 1.0, lambda r, t: zero(r), 1e8, 100.0) == pytest.approx(2 / 3, rel=1e-10)
    with pytest.raises(DomainError):
        orthogonality_lhs(0.0, 0.0, lambda r, t: zero(r), 3.0, 1.0)
    with pytest.raises(DomainError):
        orthogonality_lhs(1.0, 0.0, lambda r, t: zero(r), 1.0, 1.0)


@settings(max_examples=20, deadline=None)
@given(alpha=st.floats(-10.0, 10.0), R=st.floats(1.5, 50.0))
def test_orthogonality_affine_in_rate(alpha, R):
    theta = lambda r, t: 1e-3 / (2 + r * r)  # noqa: E731
    base = orthogonality_lhs(1.0, 0.0, theta, R, 10.0)
    val = orthogonality_lhs(1.0, alpha, theta, R, 10.0)
    assert val == pytest.approx(base + alpha * mode_norm(R), rel=1e-9, abs=1e-12)
    root = solve_rate(1.0, theta, R, 10.0)
    assert abs(orthogonality_lhs(1.0, root, theta, R, 10.0)) <= 1e-10 * abs(base)


def test_solved_rate_matches_leading_rate():
    t = 1e4
    theta = lambda r, tt: heat_evolve(POWERLOG, 0.0, tt, r, epsabs=1e-300, epsrel=1e-11)  # noqa: E731
    rate = solve_rate(1.0, theta, 1e3, t)
    assert rate == pytest.approx(modulation_rhs(t, POWERLOG), rel=0.01)


# -- leading rate -----------------------------------------------------------------

def test_rate_of_zero_datum():
    assert modulation_rhs(100.0, zero) == 0.0


@pytest.mark.parametrize("t", [50.0, 1e4])
def test_rate_for_unit_box(t):
    box = lambda s: np.where(np.asarray(s) <= math.sqrt(t), 1.0, 0.0)  # noqa: E731
    got = modulation_rhs(t, box, upper=math.sqrt(t), breakpoints=[math.sqrt(t)])
    exact = -(3.0 / 32.0) * 32.0 * 2.0 * (1.0 - math.exp(-0.25) * (1 + 0.25 + 1 / 32))
    assert got == pytest.approx(exact, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(0.05, 0.95), amp=st.floats(0.1, 10.0), log_t=st.floats(math.log(20.0), 500.0))
def test_rate_sign_law(a, amp, log_t):
    t = math.exp(log_t)
    pos = modulation_rhs(t, Theta0Spec("PowerLog", a, 1, amp))
    neg = modulation_rhs(t, Theta0Spec("PowerLog", a, -1, amp))
    assert pos < 0 < neg
    assert pos == pytest.approx(-neg, rel=1e-12)


def test_rate_asymptotics():
    # t lam'/lam -> -(3/4) (log t)^-a for PowerLog data
    ell = 400.0
    rate = modulation_rhs(math.exp(ell), POWERLOG)
    assert rate * math.exp(ell) * ell ** 0.5 == pytest.approx(-0.75, rel=0.01)


# -- identities and Fubini ----------------------------------------------------------

def test_identity_spot_value():
    assert identity_first(1.0, 4.0) == pytest.approx(4 * (math.exp(-1 / 16) * 17 / 4 - 5 * math.exp(-0.25)), rel=1e-15)
    assert identity_first(1.0, 4.0) == pytest.approx(0.394, abs=5e-4)
    assert identity_first(2.0, 4.0) == pytest.approx(0.0, abs=1e-15)
    assert identity_second(1.5, 3.0, 3.0) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=20, deadline=None)
@given(s=st.floats(0.2, 5.0), k=st.floats(1.0, 50.0), f=st.floats(0.02, 1.0))
def test_identities_match_quadrature(s, k, f):
    t = s * s * k
    r1, r2 = integral_identities_check(s, t, t * f)
    assert r1 <= 1e-10 and r2 <= 1e-10


def test_identities_preconditions():
    with pytest.raises(DomainError):
        integral_identities_check(2.0, 1.0, 0.5)


def test_fubini_box_and_powerlog():
    box = lambda s: np.where(np.asarray(s) <= 5.0, 1.0, 0.0)  # noqa: E731
    assert fubini_check(box, 1e2, 1e4, breakpoints=(5.0,)).residual <= 1e-10
    assert fubini_check(POWERLOG, 1e2, 1e4).residual <= 1e-8
    assert fubini_check(zero, 1e2, 1e3).residual == 0.0
    with pytest.raises(DomainError):
        fubini_check(box, 10.0, 5.0)


# -- decomposition ---------------------------------------------------------------

def test_decomposition_sum_and_smallness():
    t = 1e6
    R = math.log(t) ** 0.01
    parts = decompose_I(1.0, R, t, POWERLOG)
    direct = orthogonality_integral(1.0, R, t, POWERLOG)
    assert parts.total == pytest.approx(direct, rel=1e-4)
    assert abs(parts.I3) + abs(parts.I4) + abs(parts.I5) <= 0.05 * abs(parts.I1)


def test_bracket_tends_to_projection_constant():
    for R in (3.0, 10.0, 30.0):
        assert abs(i1_bracket(1.0, R, 1e8) - 4.0) <= 10.0 / R ** 2


def test_decomposition_precondition():
    with pytest.raises(PreconditionError):
        decompose_I(1.0, 50.0, 100.0, POWERLOG)


# -- traces ----------------------------------------------------------------------------

def test_zero_datum_keeps_scale():
    tr = integrate_modulation(zero, 100.0, 1e5, samples=50)
    assert np.all(tr.loglambda == 0.0)


def test_powerlog_band_is_uniform_in_horizon():
    # the gap to the main term saturates while log lam keeps drifting
    bands, drift = [], []
    for T in (1e3, 1e6, 1e20, 1e80, 1e250):
        tr = integrate_modulation(POWERLOG, 100.0, T, samples=200)
        bands.append(band_residual(tr, POWERLOG))
        drift.append(-tr.loglambda[-1])
    assert max(bands) < 0.6
    assert np.all(np.diff(bands) > 0) and bands[-1] - bands[-2] < 0.05
    assert drift[-1] > 50 * bands[-1]


def test_trace_derivative_matches_rate():
    tr = integrate_modulation(POWERLOG, 100.0, 1e5, samples=400, spacing="log")
    # centred differences in log t
    lt = np.log(tr.times)
    d = (tr.loglambda[2:] - tr.loglambda[:-2]) / (lt[2:] - lt[:-2])
    expect = tr.rate[1:-1] * tr.times[1:-1]
    assert np.max(np.abs(d - expect)) <= 1e-3 * np.max(np.abs(expect))


def test_oscillatory_trace_tracks_closed_form():
    tr = integrate_modulation(OSC, 100.0, 1e250, samples=400)
    diff = tr.loglambda - lambda0_closed_form(ell=np.log(2 + tr.times), a=0.5)
    # bounded band while the main term sweeps through several units
    growth = math.sqrt(math.log(2 + 1e250)) - math.sqrt(math.log(102.0))
    assert growth >= 3
    assert np.ptp(diff) < 1.0
    assert np.ptp(tr.loglambda) > 3 * np.ptp(diff)


def test_tau_examples():
    t = np.linspace(10.0, 100.0, 10)
    one = ModulationTrace(t, np.zeros_like(t), np.zeros_like(t))
    assert np.allclose(tau_of_t(one, C=1.0), t)
    two = ModulationTrace(t, np.full_like(t, math.log(2.0)), np.zeros_like(t))
    assert np.allclose(tau_of_t(two, C=1.0), (t - 10.0) / 4 + 10.0 / 4)
    with pytest.raises(DomainError):
        tau_of_t(one, C=0.5)


def test_tau_diverges_for_oscillatory_scale():
    tr = integrate_modulation(OSC, 100.0, 1e40, samples=200)
    assert np.all(np.diff(tr.tau) > 0)
    assert tr.tau[-1] > 1e30


def test_trace_validation_and_csv(tmp_path):
    with pytest.raises(DomainError):
        ModulationTrace([1.0, 1.0], [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(DomainError):
        ModulationTrace([1.0, 2.0], [0.0], [0.0, 0.0])
    tr = integrate_modulation(POWERLOG, 100.0, 1e4, samples=30)
    p = tmp_path / "trace.csv"
    tr.to_csv(p)
    back = ModulationTrace.from_csv(p)
    assert np.array_equal(back.times, tr.times)
    assert np.array_equal(back.loglambda, tr.loglambda)
    assert np.array_equal(back.tau, tr.tau)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(DomainError):
        ModulationTrace.from_csv(p)


# -- regimes -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def long_traces():
    return {name: integrate_modulation(spec, 100.0, 1e250, samples=400)
            for name, spec in (("pos", POWERLOG), ("neg", Theta0Spec("PowerLog", 0.5, -1)), ("osc", OSC))}


def test_regime_labels(long_traces):
    pos = classify_regime(long_traces["pos"])
    assert pos.regime == "BlowUp" and abs(pos.exponent - 0.5) <= 0.1
    assert classify_regime(long_traces["neg"]).regime == "BlowDown"
    osc = classify_regime(long_traces["osc"])
    assert osc.regime == "Oscillatory" and osc.new_max and osc.new_min


@settings(max_examples=10, deadline=None)
@given(factor=st.floats(1e-3, 1e3))
def test_regime_invariant_under_rescaling(long_traces, factor):
    for tr in long_traces.values():
        a, b = classify_regime(tr), classify_regime(tr.scaled(factor))
        assert a.regime == b.regime
        if not math.isnan(a.exponent):
            assert b.exponent == pytest.approx(a.exponent, abs=1e-4)


def test_constant_trace_is_bounded():
    t = np.geomspace(100.0, 1e6, 200)
    tr = ModulationTrace(t, np.zeros_like(t), np.zeros_like(t))
    assert classify_regime(tr).regime == "Bounded"
    with pytest.raises(DomainError):
        classify_regime(ModulationTrace(t[:50], np.zeros(50), np.zeros(50)))


def test_envelope_fit_recovers_exponent():
    t = np.geomspace(1e3, 1e200, 300)
    y = 1.0 - 2.0 * np.log(2 + t) ** 0.37
    p, alpha, beta, r2 = fit_envelope(t, y)
    assert p == pytest.approx(0.37, abs=1e-3) and beta == pytest.approx(-2.0, rel=1e-2) and r2 > 0.999


def test_summary_json_keys(long_traces):
    text = summary_json(classify_regime(long_traces["pos"]), band=0.1)
    assert '"regime": "BlowUp"' in text and '"band_residual": 0.1' in text and "fitted_exponent" in text


def test_law_main_term_matches_quadrature():
    t = 1e4
    q = integrate(lambda s: s * POWERLOG(s), 10.0, 100.0, 1e-14, 1e-13)[0]
    assert law_main_term(POWERLOG, 100.0, t)[0] == pytest.approx(-1.5 * (q + 0.0), rel=1e-3)
