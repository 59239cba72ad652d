"""Method-of-lines solver for ``u_t = u_rr + (5/r) u_r + 6u^2 - 2r^2 u^3``.

Space
    Vertex-centred finite volumes for the 6-D radial Laplacian on a graded
    mesh: control volume ``[r_{i-1/2}, r_{i+1/2}]`` with measure
    ``(r_{i+1/2}^6 - r_{i-1/2}^6) / 6`` and face fluxes
    ``r_f^5 (u_{i+1} - u_i) / h``.  At the origin this reduces to
    ``12 (u_1 - u_0) / h^2``, the even-extension limit of ``6 u''(0)``.
    Off-diagonal couplings are positive, so ``I - k A`` is an M-matrix for
    every step ``k``.  At ``r_max`` the Robin closure ``d/dr (r^2 u) = 0``
    keeps the ``r^-2`` tail instead of pinning it to zero.
Time
    Variable-step IMEX BDF2: diffusion implicit (one tridiagonal solve per
    step), reaction extrapolated.  The first step is IMEX Euler.  Steady
    states of the semi-discrete system are fixed points of the stepper.
    Steps are limited by ``lip_safety / max |d reaction / du|`` and by a
    predictor-corrector estimate of the local error.
Soliton balance
    With ``well_balanced`` the source ``-(A_h U_ref + reaction(U_ref))`` is
    added, ``U_ref`` being the soliton at the current origin-value scale.
    It cancels the O(h^2) defect of the discrete operator on the soliton
    family, which would otherwise drive a spurious drift of the scale along
    the dilation mode.  The reference is re-centred whenever the scale moves
    by more than ``recenter_tol`` (in log), so the remaining defect acts
    only on the small deviation ``u - U_ref``.
"""

from dataclasses import asdict, dataclass, field
import json
import math
import time as _time

import numpy as np

from ._backend import core
from .errors import BlowUpDetected, ConfigError, DomainError, StepFailure
from .grid import RadialGrid, RadialProfile, radial_laplacian, write_columns
from .profiles import Theta0Spec, reaction, soliton, soliton_dlam
from .radialheat import heat_evolve

OVERFLOW_GUARD = 1e12
# growth of max |u| over its initial value that counts as runaway
RUNAWAY_FACTOR = 1e3
POLICIES = ("OriginValue", "WeightedFit")


@dataclass
class SimConfig:
    """Full description of one run.

    ``u(r, t0) = soliton * U_{lambda0}(r) + epsilon * Theta_0(r)``.
    """

    t0: float = 100.0
    horizon: float = 1000.0
    r_max: float = None            # default 10 sqrt(horizon) + 20
    h0: float = 0.025
    cells: int = 400
    lambda0: float = 1.0
    soliton: bool = True
    epsilon: float = 1e-3
    theta0: Theta0Spec = field(default_factory=Theta0Spec)
    rtol: float = 1e-6
    atol: float = 1e-12
    max_dt: float = 1.0
    lip_safety: float = 0.25
    snapshots: int = 5
    trace_points: int = 181
    extraction: str = "OriginValue"
    subtract_background: bool = True
    well_balanced: bool = True
    recenter_tol: float = 1e-7

    def __post_init__(self):
        if self.t0 < 10:
            raise DomainError("t0 must be >= 10")
        if not self.horizon > self.t0:
            raise DomainError("horizon must exceed t0")
        if self.r_max is None:
            self.r_max = 10.0 * math.sqrt(self.horizon) + 20.0
        if self.r_max < 10.0 * math.sqrt(self.horizon):
            raise DomainError("r_max must be >= 10 sqrt(horizon)")
        if self.extraction not in POLICIES:
            raise DomainError(f"extraction must be one of {POLICIES}")
        if not self.lambda0 > 0:
            raise DomainError("lambda0 must be > 0")
        if self.cells < 8:
            raise DomainError("need at least 8 cells")
        if self.snapshots < 1 or self.trace_points < 2:
            raise DomainError("need >= 1 snapshot and >= 2 trace points")

    def grid(self):
        return RadialGrid.graded(self.r_max, self.h0, self.cells)

    def to_dict(self):
        d = asdict(self)
        d["theta0"] = self.theta0.describe()
        return d

    @classmethod
    def from_config(cls, cfg):
        """Build from flat keys ``sim.*``, ``grid.*``, ``data.*``, ``stepper.*``, ``output.*``, ``lambda.*``."""
        keys = {
            "sim.t0": ("t0", float), "sim.horizon": ("horizon", float),
            "grid.r_max": ("r_max", float), "grid.h0": ("h0", float), "grid.cells": ("cells", int),
            "data.lambda0": ("lambda0", float), "data.soliton": ("soliton", _as_bool),
            "data.epsilon": ("epsilon", float),
            "stepper.rtol": ("rtol", float), "stepper.atol": ("atol", float),
            "stepper.max_dt": ("max_dt", float), "stepper.lip_safety": ("lip_safety", float),
            "output.snapshots": ("snapshots", int), "output.trace_points": ("trace_points", int),
            "lambda.extraction": ("extraction", str),
            "lambda.subtract_background": ("subtract_background", _as_bool),
            "stepper.well_balanced": ("well_balanced", _as_bool),
            "stepper.recenter_tol": ("recenter_tol", float),
        }
        kwargs = {}
        for key, (name, conv) in keys.items():
            if key in cfg:
                try:
                    kwargs[name] = conv(cfg[key])
                except ValueError:
                    raise ConfigError(f"bad value for {key}: {cfg[key]!r}") from None
        kwargs["theta0"] = Theta0Spec.from_config(cfg)
        try:
            return cls(**kwargs)
        except DomainError as exc:
            raise ConfigError(str(exc)) from None


def _as_bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(v)


@dataclass
class SimResult:
    """Snapshots, empirical trace and diagnostics of one run."""

    snapshots: list
    trace_times: np.ndarray
    trace_lambda: np.ndarray
    diagnostics: dict
    config: SimConfig = None

    @property
    def trace_loglambda(self):
        return np.log(self.trace_lambda)

    @property
    def trace_rate(self):
        return empirical_rate(self.trace_times, np.log(self.trace_lambda))

    def write(self, outdir):
        import os

        os.makedirs(outdir, exist_ok=True)
        for k, snap in enumerate(self.snapshots):
            snap.to_csv(os.path.join(outdir, f"snapshot_{k:03d}.csv"), value_name="u")
        write_columns(os.path.join(outdir, "trace.csv"),
                      ["t", "lambda_empirical", "loglambda", "rate"],
                      [self.trace_times, self.trace_lambda, self.trace_loglambda, self.trace_rate])
        with open(os.path.join(outdir, "diagnostics.json"), "w") as fh:
            json.dump(_jsonable(self.diagnostics), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def empirical_rate(times, loglam):
    """Second-order differences of ``log lam`` on a non-uniform time grid."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(loglam, dtype=float)
    if t.size < 3:
        return np.full(t.shape, np.nan)
    return np.gradient(y, t, edge_order=2)


# -- spatial operator -----------------------------------------------------

class FVLaplacian:
    """Tridiagonal finite-volume 6-D radial Laplacian with the Robin far field."""

    def __init__(self, grid):
        r = grid.nodes
        n = grid.dimension
        h = np.diff(r)
        faces = np.concatenate([[0.0], 0.5 * (r[1:] + r[:-1]), [r[-1]]])
        vol = (faces[1:] ** n - faces[:-1] ** n) / n
        coupling = faces[1:-1] ** (n - 1) / h          # flux coefficient per interior face
        self.lower = np.zeros_like(r)
        self.upper = np.zeros_like(r)
        self.lower[1:] = coupling / vol[1:]
        self.upper[:-1] = coupling / vol[:-1]
        self.diag = -(self.lower + self.upper)
        # d/dr (r^2 u) = 0  =>  outgoing flux r^(n-1) u_r = -2 r^(n-2) u
        self.diag[-1] -= 2.0 * r[-1] ** (n - 2) / vol[-1]
        self.grid = grid

    def apply(self, u):
        out = self.diag * u
        out[1:] += self.lower[1:] * u[:-1]
        out[:-1] += self.upper[:-1] * u[1:]
        return out

    def check_m_matrix(self, k=1.0):
        """Sign structure and weak diagonal dominance of ``I - k A``."""
        d = 1.0 - k * self.diag
        lo = -k * self.lower
        up = -k * self.upper
        offsum = np.abs(lo) + np.abs(up)
        return bool(np.all(d > 0) and np.all(lo <= 0) and np.all(up <= 0) and np.all(d >= offsum))

    def solve(self, c0, k, rhs):
        """Solve ``(c0 I - k A) x = rhs``."""
        return core.solve_tridiagonal(np.ascontiguousarray(-k * self.lower),
                                      np.ascontiguousarray(c0 - k * self.diag),
                                      np.ascontiguousarray(-k * self.upper),
                                      np.ascontiguousarray(rhs))


def _reaction_lipschitz(u, r):
    return float(np.max(np.abs(12.0 * u - 6.0 * r * r * u * u)))


# -- lambda extraction ----------------------------------------------------

def extract_lambda(snapshot, policy="OriginValue", background=None, guess=None, window=4.0):
    """Soliton scale of a snapshot.

    Parameters
    ----------
    snapshot : RadialProfile
    policy : {"OriginValue", "WeightedFit"}
        ``OriginValue`` inverts ``U_lam(0) = 2 / lam^2``; ``WeightedFit``
        minimises ``sum_i w_i (u_i - bg_i - U_lam(r_i))^2`` over
        ``r_i <= window * guess`` with 6-D volume weights ``w_i``.
    background : array_like or float, optional
        Linear background subtracted before inverting / fitting.
    guess : float, optional
        Starting scale for the fit (defaults to the origin estimate).
    """
    u = snapshot.values
    bg = np.zeros_like(u) if background is None else np.broadcast_to(np.asarray(background, float), u.shape)
    core0 = u[0] - bg[0]
    if policy == "OriginValue":
        if not core0 > 0:
            raise DomainError("origin value (minus background) must be positive")
        return math.sqrt(2.0 / core0)
    if policy != "WeightedFit":
        raise DomainError(f"unknown extraction policy {policy!r}")
    from scipy.optimize import least_squares

    if guess is None:
        if not core0 > 0:
            raise DomainError("origin value must be positive to seed the fit")
        guess = math.sqrt(2.0 / core0)
    r = snapshot.r
    mask = r <= window * guess
    if mask.sum() < 4:
        raise DomainError("fit window holds fewer than 4 nodes")
    faces = np.concatenate([[0.0], 0.5 * (r[1:] + r[:-1]), [r[-1]]])
    vol = (faces[1:] ** 6 - faces[:-1] ** 6) / 6.0
    w = np.sqrt(vol[mask] / vol[mask].sum())
    rr = r[mask]
    target = (u - bg)[mask]

    def resid(x):
        return w * (target - soliton(math.exp(x[0]), rr))

    def jac(x):
        lam = math.exp(x[0])
        return (-w * soliton_dlam(lam, rr) * lam)[:, None]

    sol = least_squares(resid, [math.log(guess)], jac=jac, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if not sol.success or not np.isfinite(sol.x[0]):
        raise StepFailure(f"lambda fit diverged: {sol.message}")
    return math.exp(sol.x[0])


# -- driver ---------------------------------------------------------------

def initial_profile(cfg, grid):
    r = grid.nodes
    u = cfg.epsilon * cfg.theta0(r) if cfg.epsilon else np.zeros_like(r)
    if cfg.soliton:
        u = u + soliton(cfg.lambda0, r)
    return np.asarray(u, dtype=float)


def _background_at_origin(cfg, times):
    """``epsilon Theta(0, t)`` from the free heat flow of the datum (started at t0)."""
    out = np.zeros(len(times))
    if not cfg.epsilon:
        return out
    for k, t in enumerate(times):
        if t > cfg.t0:
            out[k] = cfg.epsilon * float(heat_evolve(cfg.theta0, cfg.t0, t, np.array([0.0]),
                                                     epsabs=1e-300, epsrel=1e-12)[0])
        else:
            out[k] = cfg.epsilon * float(cfg.theta0(0.0))
    return out


def _background_profile(cfg, grid, t, window):
    r = grid.nodes
    bg = np.zeros_like(r)
    if not cfg.epsilon:
        return bg
    mask = r <= window
    if t > cfg.t0:
        bg[mask] = cfg.epsilon * heat_evolve(cfg.theta0, cfg.t0, t, r[mask], epsabs=1e-300, epsrel=1e-11)
    else:
        bg[mask] = cfg.epsilon * cfg.theta0(r[mask])
    return bg


def simulate(cfg, grid=None, progress=None):
    """Run the flow from ``cfg.t0`` to ``cfg.horizon``.

    Returns
    -------
    SimResult
        Snapshots at ``cfg.snapshots`` evenly spaced times (including both
        ends), the empirical scale at ``cfg.trace_points`` times and
        diagnostics (step counts, M-matrix check, peak values).

    Raises
    ------
    BlowUpDetected
        ``max |u|`` exceeded the overflow guard, or the step collapsed while
        ``max |u|`` was running away (see ``RUNAWAY_FACTOR``).
    StepFailure
        The step size collapsed.
    """
    wall = _time.perf_counter()
    grid = cfg.grid() if grid is None else grid
    r = grid.nodes
    op = FVLaplacian(grid)
    m_ok = op.check_m_matrix(cfg.max_dt)
    if not m_ok:
        raise StepFailure("discrete diffusion operator lost the M-matrix property")

    trace_times = np.linspace(cfg.t0, cfg.horizon, cfg.trace_points)
    snap_times = np.linspace(cfg.t0, cfg.horizon, cfg.snapshots) if cfg.snapshots > 1 \
        else np.array([cfg.horizon])
    stops = np.unique(np.concatenate([trace_times, snap_times]))
    trace_set = set(trace_times.tolist())
    snap_set = set(snap_times.tolist())

    u = initial_profile(cfg, grid)
    t = cfg.t0
    snaps, u_origin, u_trace = [], [], []

    def record(tnow, unow):
        if tnow in trace_set:
            u_origin.append(unow[0])
            u_trace.append(unow.copy() if cfg.extraction == "WeightedFit" else None)
        if tnow in snap_set:
            snaps.append(RadialProfile(grid, unow.copy(), tnow))

    record(t, u)
    balance = cfg.soliton and cfg.well_balanced
    log_ref = None
    source = 0.0
    recenters = 0

    def reference_source(log_lam):
        ref = soliton(math.exp(log_lam), r)
        return -(op.apply(ref) + reaction(ref, r))

    if balance:
        log_ref = math.log(cfg.lambda0)
        source = reference_source(log_ref)
    f_prev = None
    u_prev = None
    k_prev = None
    k = min(cfg.max_dt, 1e-3)
    steps = rejected = 0
    max_u = peak0 = float(np.max(np.abs(u)))
    origin_positive = bool(u[0] > 0)
    stop_idx = 1
    while stop_idx < stops.size:
        target = stops[stop_idx]
        if balance:
            if not u[0] > 0:
                raise DomainError(f"origin value became non-positive at t = {t!r}")
            log_est = 0.5 * math.log(2.0 / u[0])
            if abs(log_est - log_ref) > cfg.recenter_tol:
                log_ref = log_est
                source = reference_source(log_ref)
                recenters += 1
        f_now = reaction(u, r) + source
        lip = _reaction_lipschitz(u, r)
        k_lip = cfg.lip_safety / lip if lip > 0 else cfg.max_dt
        k = min(k, cfg.max_dt, k_lip)
        if t + k >= target - 1e-12 * max(1.0, abs(target)):
            k = target - t
        floor = 1e-12 * max(1.0, t)
        if k < floor:
            peak = float(np.max(np.abs(u)))
            # u' ~ 6u^2 leaves about 1/(6 max u) before blow-up; when the peak
            # has run away and that time is within a million floor-sized
            # steps, the guard value is out of reach in double precision
            if peak > RUNAWAY_FACTOR * peak0 and 1.0 / (6.0 * peak) < 1e6 * floor:
                raise BlowUpDetected(f"max |u| = {peak:.3g} runs away (step collapsed to {k:.3g})", t)
            raise StepFailure(f"step size underflow at t = {t!r} (k = {k:.3g}, max |u| = {peak:.3g})")
        if u_prev is None:
            rhs = u + k * f_now
            u_new = op.solve(1.0, k, rhs)
            pred = u + k * f_now  # explicit Euler as a crude comparison
            err_scale = 0.5
        else:
            w = k / k_prev
            c0 = (1.0 + 2.0 * w) / (1.0 + w)
            rhs = (1.0 + w) * u - (w * w / (1.0 + w)) * u_prev \
                + k * ((1.0 + w) * f_now - w * f_prev)
            u_new = op.solve(c0, k, rhs)
            pred = u + w * (u - u_prev)   # linear extrapolation
            # local error of BDF2 ~ (w + 1)/(3 (2 w + 1)) * (u_new - pred) scale
            err_scale = (1.0 + w) / (3.0 * (1.0 + 2.0 * w))
        if not np.all(np.isfinite(u_new)):
            raise BlowUpDetected("non-finite values in the solution", t)
        err = err_scale * np.max(np.abs(u_new - pred) / (cfg.atol + cfg.rtol * np.abs(u_new)))
        if err > 1.0 and k > 1e-9 * max(1.0, t):
            rejected += 1
            k *= max(0.2, 0.9 / math.sqrt(err))
            continue
        steps += 1
        u_prev, f_prev, k_prev = u, f_now, k
        u = u_new
        t = target if abs(t + k - target) <= 1e-12 * max(1.0, abs(target)) else t + k
        peak = float(np.max(np.abs(u)))
        max_u = max(max_u, peak)
        if peak > OVERFLOW_GUARD:
            raise BlowUpDetected(f"max |u| = {peak:.3g} exceeded the overflow guard", t - k)
        origin_positive &= bool(u[0] > 0) or not cfg.soliton
        k = k * min(2.0, max(0.5, 0.9 / math.sqrt(max(err, 1e-10))))
        if t == target:
            record(t, u)
            stop_idx += 1
            if progress is not None:
                progress(t)

    diagnostics = {
        "steps": steps, "rejected": rejected, "max_u": max_u, "m_matrix": m_ok,
        "origin_positive": origin_positive, "grid_nodes": int(r.size), "h_min": grid.h_min,
        "r_max": grid.r_max, "recenters": recenters,
        "wall_seconds": _time.perf_counter() - wall,
    }
    if cfg.soliton:
        lam = _extract_trace(cfg, grid, trace_times, np.array(u_origin), u_trace)
    else:
        lam = np.full(trace_times.shape, np.nan)
    return SimResult(snaps, trace_times, lam, diagnostics, cfg)


def _extract_trace(cfg, grid, times, u0, u_full):
    if cfg.subtract_background:
        bg0 = _background_at_origin(cfg, times)
    else:
        bg0 = np.zeros(len(times))
    if cfg.extraction == "OriginValue":
        core0 = u0 - bg0
        if np.any(core0 <= 0):
            raise DomainError("origin value minus background became non-positive")
        return np.sqrt(2.0 / core0)
    lam = np.empty(len(times))
    guess = cfg.lambda0
    for j, (t, uu) in enumerate(zip(times, u_full)):
        window = 4.0 * guess
        bg = _background_profile(cfg, grid, t, window) if cfg.subtract_background else None
        lam[j] = extract_lambda(RadialProfile(grid, uu, t), "WeightedFit", bg, guess, 4.0)
        guess = lam[j]
    return lam


def pde_residual(result):
    """Residual of the flow on consecutive snapshot triples.

    Time derivative by the non-uniform centred difference, space by the
    independent central-difference stencil of
    :func:`ymheat.grid.radial_laplacian` (not the solver's finite-volume
    operator).  The last node (far-field closure) is excluded.

    Returns
    -------
    list of dict
        ``{"t", "max", "l2"}`` per interior snapshot; ``l2`` uses 6-D
        volume weights.
    """
    snaps = result.snapshots if isinstance(result, SimResult) else result
    if len(snaps) < 3:
        raise DomainError("need at least three snapshots")
    out = []
    for a, b, c in zip(snaps[:-2], snaps[1:-1], snaps[2:]):
        r = b.r
        ha, hb = b.time - a.time, c.time - b.time
        ut = (ha * ha * c.values - hb * hb * a.values + (hb * hb - ha * ha) * b.values) \
            / (ha * hb * (ha + hb))
        res = ut - radial_laplacian(b.values, r, b.grid.dimension) - reaction(b.values, r)
        res = res[:-1]
        faces = np.concatenate([[0.0], 0.5 * (r[1:] + r[:-1]), [r[-1]]])
        vol = ((faces[1:] ** 6 - faces[:-1] ** 6) / 6.0)[:-1]
        out.append({"t": b.time, "max": float(np.max(np.abs(res))),
                    "l2": float(math.sqrt(np.sum(vol * res * res) / np.sum(vol)))})
    return out
