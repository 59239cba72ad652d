import json
import math

import numpy as np
import pytest

from ymheat.errors import BlowUpDetected, ConfigError, DomainError
from ymheat.grid import RadialGrid, RadialProfile
from ymheat.pdesolver import (FVLaplacian, SimConfig, empirical_rate, extract_lambda,
                              initial_profile, pde_residual, simulate)
from ymheat.profiles import Theta0Spec, soliton, zmode
from ymheat.radialheat import heat_evolve


def test_config_validation():
    with pytest.raises(DomainError):
        SimConfig(t0=5.0)
    with pytest.raises(DomainError):
        SimConfig(t0=100.0, horizon=50.0)
    with pytest.raises(DomainError):
        SimConfig(horizon=1e4, r_max=100.0)
    with pytest.raises(DomainError):
        SimConfig(extraction="Peak")
    with pytest.raises(DomainError):
        SimConfig(cells=4)
    assert SimConfig(horizon=400.0).r_max == pytest.approx(220.0)


def test_config_from_flat_keys():
    cfg = SimConfig.from_config({"sim.t0": "20", "sim.horizon": "40", "grid.cells": "64",
                                 "data.soliton": "no", "theta0.family": "oscillatory"})
    assert cfg.t0 == 20.0 and cfg.cells == 64 and cfg.soliton is False
    assert cfg.theta0.family == "OscillatoryExplicit"
    with pytest.raises(ConfigError):
        SimConfig.from_config({"grid.cells": "many"})
    with pytest.raises(ConfigError):
        SimConfig.from_config({"sim.t0": "1"})
    assert cfg.to_dict()["theta0"]["family"] == "OscillatoryExplicit"


def test_operator_is_m_matrix_and_conservative():
    g = RadialGrid.graded(100.0, 0.05, 200)
    op = FVLaplacian(g)
    assert op.check_m_matrix(1.0) and op.check_m_matrix(1e6)
    # constants are harmonic away from the far-field row
    assert np.max(np.abs(op.apply(np.ones(g.size))[:-1])) < 1e-12


def test_operator_second_order_on_gaussian():
    errs = []
    for cells in (100, 200, 400):
        g = RadialGrid.from_stretch(12.0, 2.0, cells)
        r = g.nodes
        u = np.exp(-r * r)
        exact = (4 * r * r - 12.0) * u
        errs.append(np.max(np.abs(FVLaplacian(g).apply(u) - exact)[:-5]))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) > 1.8


def test_tridiagonal_solve(backend):
    g = RadialGrid.graded(50.0, 0.1, 80)
    op = FVLaplacian(g)
    rhs = np.random.default_rng(1).normal(size=g.size)
    x = op.solve(1.5, 0.3, rhs)
    assert np.allclose(1.5 * x - 0.3 * op.apply(x), rhs, rtol=1e-12, atol=1e-12)


def test_extract_lambda_policies():
    g = RadialGrid.graded(50.0, 0.01, 400)
    snap = RadialProfile(g, soliton(2.0, g.nodes))
    assert extract_lambda(snap) == pytest.approx(2.0, rel=1e-14)
    assert extract_lambda(snap, "WeightedFit") == pytest.approx(2.0, rel=1e-10)
    bg = 1e-3
    shifted = snap.with_values(snap.values + bg)
    assert extract_lambda(shifted, background=bg) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(DomainError):
        extract_lambda(snap, "Peak")
    with pytest.raises(DomainError):
        extract_lambda(snap.with_values(-snap.values))


def test_fit_is_robust_to_mode_perturbation():
    # a zero-mode kick moves the scale to first order; both policies agree
    g = RadialGrid.graded(50.0, 0.01, 400)
    snap = RadialProfile(g, soliton(2.0, g.nodes) + 1e-6 * zmode(g.nodes / 2.0) / 4.0)
    a = extract_lambda(snap)
    b = extract_lambda(snap, "WeightedFit")
    assert abs(a - 2.0) < 1e-4 and abs(b - 2.0) < 1e-4


def test_empirical_rate_exact_on_quadratic():
    t = np.array([1.0, 1.5, 2.5, 4.0, 6.0])
    assert np.allclose(empirical_rate(t, t * t), 2 * t, rtol=1e-12)
    assert np.all(np.isnan(empirical_rate(t[:2], t[:2])))


def test_initial_profile():
    cfg = SimConfig(t0=10.0, horizon=20.0, epsilon=0.1, theta0=Theta0Spec("PowerLog", 0.5, -1))
    g = cfg.grid()
    u = initial_profile(cfg, g)
    assert np.allclose(u, soliton(1.0, g.nodes) + 0.1 * cfg.theta0(g.nodes))


def test_soliton_stays_put(backend):
    cfg = SimConfig(t0=10.0, horizon=20.0, r_max=60.0, h0=0.05, cells=100, epsilon=0.0,
                    snapshots=5, trace_points=11)
    res = simulate(cfg)
    g = res.snapshots[0].grid
    dev = max(np.max(np.abs(s.values - soliton(1.0, g.nodes))) for s in res.snapshots)
    assert dev < 1e-10
    assert np.max(np.abs(res.trace_lambda - 1.0)) < 1e-10
    assert res.diagnostics["m_matrix"] and res.diagnostics["origin_positive"]


def test_zero_data_stays_zero():
    cfg = SimConfig(t0=10.0, horizon=20.0, r_max=60.0, cells=100, soliton=False, epsilon=0.0)
    res = simulate(cfg)
    assert all(np.all(s.values == 0.0) for s in res.snapshots)
    assert np.all(np.isnan(res.trace_lambda))


def test_small_data_follow_heat_flow():
    th = Theta0Spec("PowerLog", 0.5)
    eps = 1e-4
    cfg = SimConfig(t0=100.0, horizon=200.0, h0=0.05, cells=300, soliton=False, epsilon=eps,
                    theta0=th, snapshots=3, trace_points=3)
    res = simulate(cfg)
    for s in res.snapshots[1:]:
        ref = eps * heat_evolve(th, 100.0, s.time, s.r[:200])
        # quadratic reaction contributes at relative order eps
        assert np.max(np.abs(s.values[:200] - ref)) < 5e-3 * np.max(np.abs(ref))


def test_pde_residual_converges_under_refinement():
    # the independent central-difference residual is O(h^2)
    vals = []
    for cells, h0 in ((200, 0.05), (400, 0.025)):
        cfg = SimConfig(t0=10.0, horizon=12.0, r_max=60.0, h0=h0, cells=cells, epsilon=1e-2,
                        snapshots=9, trace_points=3)
        vals.append(max(p["max"] for p in pde_residual(simulate(cfg))))
    assert vals[0] / vals[1] > 3.5
    with pytest.raises(DomainError):
        pde_residual(simulate(cfg).snapshots[:2])


def test_large_data_blow_up_is_labelled():
    cfg = SimConfig(t0=10.0, horizon=11.0, r_max=60.0, h0=0.05, cells=100, soliton=False,
                    epsilon=1e4, snapshots=2, trace_points=2)
    with pytest.raises(BlowUpDetected) as info:
        simulate(cfg)
    assert info.value.last_time > 10.0


def test_result_files(tmp_path):
    cfg = SimConfig(t0=10.0, horizon=12.0, r_max=60.0, h0=0.05, cells=64, snapshots=3, trace_points=5)
    res = simulate(cfg)
    res.write(tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["diagnostics.json", "snapshot_000.csv", "snapshot_001.csv", "snapshot_002.csv",
                     "trace.csv"]
    head = (tmp_path / "trace.csv").read_text().splitlines()[0]
    assert head == "t,lambda_empirical,loglambda,rate"
    diag = json.loads((tmp_path / "diagnostics.json").read_text())
    assert diag["steps"] > 0 and diag["grid_nodes"] == 65
    back = RadialProfile.from_csv(tmp_path / "snapshot_002.csv")
    assert np.array_equal(back.values, res.snapshots[2].values)
