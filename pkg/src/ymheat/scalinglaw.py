"""Modulation law for the soliton scale driven by a slowly decaying heat background.

Projecting the inner problem onto the dilation mode ``Z`` gives

    int_0^{4R} [V(rho) Theta(lam rho, t) + 4 (lam'/lam) (1+rho^2)^-2] Z(rho) rho^5 drho = 0,

an affine equation in ``lam'/lam``.  Replacing ``Theta(lam rho, t)`` by its
value at the origin and letting ``R -> inf`` (``int V Z rho^5 = 4``,
``int Z^2 rho^5 = 1/6``) leaves the leading rate

    lam'/lam = -(3/32) t^-3 int_0^inf s^5 exp(-s^2/4t) Theta_0(s) ds,

whose time integral reproduces ``log lam ~ -(3/2) int s Theta_0 ds`` over
``[sqrt(t0), sqrt(t)]``.  Everything here works in the scaled variable
``x = s / sqrt(t)`` so that horizons like ``t = 1e250`` stay in range.
"""

from dataclasses import dataclass, field
import json
import math
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, PreconditionError, QuadratureError, StepFailure
from .grid import read_columns, write_columns
from .profiles import Theta0Spec, lin_potential, potential, zmode
from .quadrature import integrate, integrate_batch
from .radialheat import heat_evolve, kernel_gamma

RATE_PREFACTOR = 3.0 / 32.0
# beyond x = 40 the Gaussian weight exp(-x^2/4) is below 1e-173
X_MAX = 40.0


# -- data helpers ---------------------------------------------------------

class _Datum:
    """Uniform access to a Theta0Spec or a plain callable datum."""

    def __init__(self, theta0, breakpoints=()):
        self.spec = theta0 if isinstance(theta0, Theta0Spec) else None
        self.f = theta0
        extra = tuple(self.spec.breakpoints()) if self.spec is not None else ()
        self.breakpoints = tuple(float(b) for b in tuple(breakpoints) + extra)

    def __call__(self, s):
        return np.asarray(self.f(np.asarray(s, dtype=float)), dtype=float) * np.ones_like(s)

    def scaled(self, x, log_t):
        if self.spec is not None:
            return self.spec.scaled(x, log_t)
        t = math.exp(log_t)
        return t * self(math.sqrt(t) * np.asarray(x, dtype=float))


def _geometric_breaks(lo, hi, scale, count=8):
    """Points ``scale * 10^k`` inside ``(lo, hi)``; helps panels find structure near 0."""
    pts = scale * 10.0 ** np.arange(-count, count + 1)
    return [p for p in pts if lo < p < hi]


@dataclass(frozen=True)
class ThetaStarGauge:
    """Decay gauge ``t^-1 (log t)^-a``."""

    a: float

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise DomainError("gauge exponent must lie in (0, 1)")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return 1.0 / (t * np.log(t) ** self.a)


# -- orthogonality --------------------------------------------------------

def mode_norm(R):
    """``4 int_0^{4R} Z(rho) rho^5 (1+rho^2)^-2 drho`` (slope of the affine solve)."""
    # closed form of int_0^X rho^5 (1+rho^2)^-4 with y = 1 + X^2
    y = 1.0 + (4.0 * R) ** 2
    val = 0.5 * (1.0 / 3.0 - 1.0 / y + 1.0 / y ** 2 - 1.0 / (3.0 * y ** 3))
    return 4.0 * val


def projection_constant(epsrel=1e-13):
    """Quadrature of ``int_0^inf V Z rho^5 drho`` with ``V`` from its definition (exactly 4)."""
    return integrate(lambda r: lin_potential(r) * zmode(r) * r ** 5, 0.0, np.inf,
                     1e-300, epsrel, breakpoints=(1.0, 10.0))[0]


def mode_moment(epsrel=1e-13):
    """Quadrature of ``int_0^inf Z rho^5 (1+rho^2)^-2 drho`` (exactly 1/6)."""
    return integrate(lambda r: zmode(r) * r ** 5 / (1.0 + r * r) ** 2, 0.0, np.inf,
                     1e-300, epsrel, breakpoints=(1.0, 10.0))[0]


def _projection(lam, theta_at, R, t, epsrel=1e-10):
    def g(rho):
        return potential(rho) * zmode(rho) * rho ** 5 * theta_at(lam * rho, t)

    val, _ = integrate(g, 0.0, 4.0 * R, 1e-14, epsrel, breakpoints=(1.0, 3.0))
    return val


def orthogonality_lhs(lam, lam_dot, theta_at, R, t, epsrel=1e-10):
    """Left side of the orthogonality condition for a background ``theta_at(r, t)``.

    Parameters
    ----------
    lam, lam_dot : float
        Scale and its time derivative.
    theta_at : callable
        ``theta_at(r, t)`` vectorised in ``r``.
    R : float
        Inner radius; the projection runs over ``rho <= 4R``.
    """
    if not lam > 0:
        raise DomainError("lam must be > 0")
    if not R > 1:
        raise DomainError("R must exceed 1")
    return _projection(lam, theta_at, R, t, epsrel) + mode_norm(R) * lam_dot / lam


def solve_rate(lam, theta_at, R, t, epsrel=1e-10):
    """Root ``lam'/lam`` of :func:`orthogonality_lhs` (one linear solve)."""
    if not R > 1:
        raise DomainError("R must exceed 1")
    return -_projection(lam, theta_at, R, t, epsrel) / mode_norm(R)


# -- leading rate ---------------------------------------------------------

def _log_heat_time(t, origin):
    if origin == 0.0:
        return math.log(t)
    if not t > origin:
        raise DomainError("time must exceed the heat origin")
    return math.log(t) + math.log1p(-origin / t)


def _gaussian_moment(datum, log_tau, upper_x=X_MAX, epsrel=1e-12):
    """``int_0^upper x^5 exp(-x^2/4) tau Theta_0(sqrt(tau) x) dx``."""
    if upper_x <= 0:
        return 0.0
    inv = math.exp(-0.5 * log_tau)
    bps = _geometric_breaks(0.0, upper_x, inv, 10) + [1.0, 2.0, math.sqrt(10.0), 6.0]
    bps += [b * inv for b in datum.breakpoints]
    bps = sorted(p for p in bps if 0 < p < upper_x)

    def g(x, _k):
        return x ** 5 * np.exp(-0.25 * x * x) * datum.scaled(x, log_tau)

    # absolute floor relative to the weight scale int x^5 e^{-x^2/4} = 128
    val, _ = integrate_batch(g, 0.0, upper_x, 1e-15 * 128 * abs(datum.scaled(1.0, log_tau)) + 1e-300,
                             epsrel, [np.array([p]) for p in bps])
    return float(val[0])


def modulation_rhs(t, theta0, origin=0.0, upper=None, epsrel=1e-12, breakpoints=()):
    """Leading modulation rate ``lam'/lam`` at time ``t``.

    ``-(3/32) tau^-3 int_0^upper s^5 exp(-s^2/4tau) Theta_0(s) ds`` with heat
    time ``tau = t - origin``.  ``upper=None`` integrates over the whole
    half-line (the full leading rate); a finite ``upper`` truncates.

    ``theta0`` is a :class:`Theta0Spec` or a vectorised callable.
    """
    datum = theta0 if isinstance(theta0, _Datum) else _Datum(theta0, breakpoints)
    log_tau = _log_heat_time(t, origin)
    ux = X_MAX if upper is None else min(X_MAX, upper * math.exp(-0.5 * log_tau))
    return -RATE_PREFACTOR * math.exp(-log_tau) * _gaussian_moment(datum, log_tau, ux, epsrel)


def _log_rate(ell, datum, origin):
    """``d log lam / d log t`` at ``log t = ell``."""
    if origin == 0.0:
        log_tau = ell
    else:
        log_tau = ell + math.log1p(-origin * math.exp(-ell))
    return -RATE_PREFACTOR * math.exp(ell - log_tau) * _gaussian_moment(datum, log_tau)


# -- I decomposition ------------------------------------------------------

class IDecomposition(NamedTuple):
    I1: float
    I2: float
    I3: float
    I4: float
    I5: float

    @property
    def total(self):
        return math.fsum(self)


def _ired2_minus_half(xi):
    """``(xi/2)^-2 I_2(xi) - 1/2`` without cancellation, for ``xi <= 1``."""
    q = 0.25 * xi * xi
    term = q / 6.0
    total = term.copy()
    for k in range(2, 20):
        term = term * q / (k * (k + 2))
        total += term
    return total


def i1_bracket(lam, R, t, epsrel=1e-13):
    """``int_0^{4R} V Z rho^5 exp(-lam^2 rho^2 / 4t) drho``; tends to 4 as R grows."""
    return integrate(lambda r: potential(r) * zmode(r) * r ** 5 * np.exp(-(lam * r) ** 2 / (4 * t)),
                     0.0, 4.0 * R, 1e-15, epsrel, breakpoints=(1.0, 3.0))[0]


def decompose_I(lam, R, t, theta0, origin=0.0, epsrel=1e-10):
    """Split the projection ``int_0^{4R} V Theta(lam rho, t) Z rho^5`` into five parts.

    With ``xi = lam rho s / 2t`` the kernel is replaced by its ``xi -> 0``
    limit ``s^5 exp(-(lam^2 rho^2 + s^2)/4t) / 64t^3`` on ``xi <= 1``:

    * ``I1``: ``s <= sqrt(t)``, limit kernel, full rho range;
    * ``I2``: ``sqrt(t) <= s <= t/(2 lam R)``, limit kernel, full rho range;
    * ``I3``: ``s >= t/(2 lam R)``, limit kernel on ``rho <= 2t/(lam s)``;
    * ``I4``: ``s >= t/(2 lam R)``, exact kernel on ``rho >= 2t/(lam s)`` (``xi > 1``);
    * ``I5``: exact minus limit kernel on ``xi <= 1``, of size ``lam^2 rho^2 s^7 / (3072 t^5)``.

    The five parts add up exactly to the projection.  ``t`` is the heat
    time measured from ``origin``.
    """
    tau = float(t - origin)
    if not tau > 0:
        raise DomainError("heat time must be > 0")
    if lam * R > math.sqrt(tau) / 100.0:
        raise PreconditionError(f"decomposition needs lam R <= sqrt(t)/100 (lam R = {lam * R:g})")
    datum = _Datum(theta0)
    sq = math.sqrt(tau)
    s_max = X_MAX * sq
    s_split = tau / (2.0 * lam * R)
    rho_max = 4.0 * R
    vz = lambda rho: potential(rho) * zmode(rho) * rho ** 5  # noqa: E731

    def lead(s):
        return s ** 5 / (64.0 * tau ** 3) * np.exp(-s * s / (4.0 * tau)) * datum(s)

    sbps = _geometric_breaks(0.0, s_max, 1.0) + list(datum.breakpoints) + [2 * sq, 4 * sq, 8 * sq]
    bracket = i1_bracket(lam, R, tau)
    inner1 = integrate(lead, 0.0, sq, 1e-300, 1e-13, [p for p in sbps if p < sq])[0]
    I1 = bracket * inner1
    floor = 1e-13 * abs(I1) + 1e-300

    hi2 = min(s_split, s_max)
    I2 = 0.0
    if hi2 > sq:
        I2 = bracket * integrate(lead, sq, hi2, floor / max(bracket, 1e-300), epsrel,
                                 [p for p in sbps if sq < p < hi2])[0]

    I3 = I4 = 0.0
    if s_split < s_max:
        def outer3(s, _k):
            up = 2.0 * tau / (lam * s)

            def inner(r, j):
                return vz(r) * np.exp(-(lam * r) ** 2 / (4 * tau))

            v, _ = integrate_batch(inner, np.zeros_like(s), up, floor * 1e-3, 1e-12)
            return lead(s) * v

        I3 = float(integrate_batch(outer3, s_split, s_max, floor, epsrel)[0][0])

        def outer4(s, _k):
            lo = 2.0 * tau / (lam * s)

            def inner(r, j):
                return vz(r) * kernel_gamma(6, lam * r, s[j], tau)

            v, _ = integrate_batch(inner, lo, np.full(s.shape, rho_max), floor * 1e-3, 1e-12)
            return datum(s) * v

        I4 = float(integrate_batch(outer4, s_split, s_max, floor, epsrel)[0][0])

    def outer5(rho, _k):
        up = np.minimum(np.where(rho > 0, 2.0 * tau / (lam * np.maximum(rho, 1e-300)), np.inf), s_max)
        rr = lam * rho

        def inner(s, j):
            xi = rr[j] * s / (2.0 * tau)
            base = s ** 5 / (32.0 * tau ** 3) * np.exp(-(rr[j] ** 2 + s * s) / (4.0 * tau))
            return base * _ired2_minus_half(xi) * datum(s)

        bps = [np.full(rho.shape, p) for p in sbps]
        v, _ = integrate_batch(inner, np.zeros_like(rho), up, 1e-300, 1e-11, bps)
        return vz(rho) * v

    I5 = float(integrate_batch(outer5, 0.0, rho_max, 1e-300, 1e-9,
                               [np.array([1.0]), np.array([3.0])])[0][0])
    return IDecomposition(I1, I2, I3, I4, I5)


def orthogonality_integral(lam, R, t, theta0, origin=0.0, epsrel=1e-10):
    """Direct two-dimensional value of ``int_0^{4R} V Theta(lam rho, t) Z rho^5 drho``.

    ``Theta`` comes from :func:`ymheat.radialheat.heat_evolve` at every
    outer node; no splitting of the kernel is involved.
    """
    datum = _Datum(theta0)
    tau = float(t - origin)

    def outer(rho, _k):
        theta = heat_evolve(datum, 0.0, tau, lam * rho, n=6, epsabs=1e-300, epsrel=1e-12,
                            breakpoints=datum.breakpoints)
        return potential(rho) * zmode(rho) * rho ** 5 * theta

    v, _ = integrate_batch(outer, 0.0, 4.0 * R, 1e-300, epsrel, [np.array([1.0]), np.array([3.0])])
    return float(v[0])


# -- modulation trace -----------------------------------------------------

@dataclass
class ModulationTrace:
    """Samples of ``log lam`` with rate ``lam'/lam`` and the inner time ``tau``."""

    times: np.ndarray
    loglambda: np.ndarray
    rate: np.ndarray
    tau: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.loglambda = np.asarray(self.loglambda, dtype=float)
        self.rate = np.asarray(self.rate, dtype=float)
        n = self.times.size
        if self.loglambda.size != n or self.rate.size != n:
            raise DomainError("trace columns must have equal length")
        if n and np.any(np.diff(self.times) <= 0):
            raise DomainError("trace times must be strictly increasing")
        if self.tau is None:
            self.tau = tau_of_t(self) if n else np.empty(0)
        self.tau = np.asarray(self.tau, dtype=float)

    def __len__(self):
        return self.times.size

    @property
    def lam(self):
        return np.exp(self.loglambda)

    def scaled(self, factor):
        """Same trace with ``lam`` multiplied by ``factor``."""
        return ModulationTrace(self.times, self.loglambda + math.log(factor), self.rate,
                               None, dict(self.meta))

    def to_csv(self, path):
        write_columns(path, ["t", "loglambda", "rate", "tau"],
                      [self.times, self.loglambda, self.rate, self.tau])

    @classmethod
    def from_csv(cls, path):
        header, cols = read_columns(path)
        if header[:3] != ["t", "loglambda", "rate"]:
            raise DomainError(f"{path}: not a modulation trace (header {','.join(header)})")
        tau = cols[3] if len(cols) > 3 and header[3] == "tau" else None
        return cls(cols[0], cols[1], cols[2], tau)


def tau_of_t(trace, C=10.0):
    """Inner time ``int_{t0}^t lam^-2 + C t0 lam(t0)^-2`` by the cumulative trapezoid rule."""
    if C < 1:
        raise DomainError("anchor constant must be >= 1")
    t = trace.times
    w = np.exp(-2.0 * trace.loglambda)
    steps = 0.5 * (w[1:] + w[:-1]) * np.diff(t)
    return C * t[0] * w[0] + np.concatenate([[0.0], np.cumsum(steps)])


def integrate_modulation(theta0, t0, T, samples=400, rtol=1e-10, atol=1e-12, origin=0.0,
                         loglambda0=0.0, C=10.0, spacing="loglog", breakpoints=()):
    """Integrate ``d log lam / dt = modulation_rhs`` from ``t0`` to ``T``.

    The equation is solved in ``ell = log t`` with an explicit adaptive
    Runge-Kutta pair (DOP853); output is sampled at ``samples`` points
    evenly spaced in ``log log t`` (``spacing="loglog"``) or ``log t``.

    Returns
    -------
    ModulationTrace
    """
    if not T > t0:
        raise DomainError("need T > t0")
    if not t0 > max(origin, 1.0):
        raise DomainError("need t0 > max(origin, 1)")
    datum = _Datum(theta0, breakpoints)
    l0, l1 = math.log(t0), math.log(T)
    if spacing == "loglog":
        ell = np.exp(np.linspace(math.log(l0), math.log(l1), samples))
    elif spacing == "log":
        ell = np.linspace(l0, l1, samples)
    else:
        raise DomainError(f"unknown spacing {spacing!r}")
    ell[0], ell[-1] = l0, l1
    rhs_cache = {}

    def rhs(x, _y):
        key = float(x)
        if key not in rhs_cache:
            rhs_cache[key] = _log_rate(key, datum, origin)
        return [rhs_cache[key]]

    try:
        sol = solve_ivp(rhs, (l0, l1), [loglambda0], method="DOP853", t_eval=ell,
                        rtol=rtol, atol=atol)
    except QuadratureError as exc:
        raise StepFailure(f"rate evaluation failed: {exc}") from exc
    if sol.status != 0:
        raise StepFailure(f"modulation integration stopped: {sol.message}")
    times = np.exp(ell)
    logrates = np.array([_log_rate(float(x), datum, origin) for x in ell])
    trace = ModulationTrace(times, sol.y[0], logrates / times, None,
                            {"t0": t0, "T": T, "origin": origin, "rhs_evals": len(rhs_cache)})
    trace.tau = tau_of_t(trace, C)
    return trace


def lambda0_closed_form(t=None, a=0.5, t0=None, ell=None, amplitude=1.0):
    """``log lam_0(t) - log C_t0 = -(3/4) amplitude L^(1-a) cos(log L)``, ``L = log(2 + t)``.

    Pass ``ell`` (``L`` itself) for horizons beyond floating range.  ``t0``
    is only validated; the anchor ``log C_t0`` is :func:`lambda0_anchor`.
    """
    if ell is None:
        if t is None:
            raise DomainError("need t or ell")
        if t0 is not None and t < t0:
            raise DomainError("t must be >= t0")
        ell = np.log(2.0 + np.asarray(t, dtype=float))
    ell = np.asarray(ell, dtype=float)
    out = -0.75 * amplitude * ell ** (1.0 - a) * np.cos(np.log(ell))
    return out if out.ndim else float(out)


def lambda0_anchor(a, t0, amplitude=1.0):
    """``log C_t0``, the value making ``log lam_0(t0) = 0``."""
    return -lambda0_closed_form(t0, a, amplitude=amplitude)


def law_main_term(theta0, t0, t):
    """``-(3/2) int_{sqrt t0}^{sqrt t} s Theta_0(s) ds`` for a closed-form datum."""
    l0 = math.log(2.0 + t0)
    lt = np.log(2.0 + np.asarray(t, dtype=float))
    m0 = theta0.moment_log(l0)
    return -1.5 * (np.array([theta0.moment_log(x) for x in np.atleast_1d(lt)]) - m0)


def band_residual(trace, theta0):
    """Width (max - min) of ``log lam - law_main_term`` along the trace."""
    d = trace.loglambda - trace.loglambda[0] - law_main_term(theta0, trace.times[0], trace.times)
    return float(d.max() - d.min())


# -- identities -----------------------------------------------------------

def _eta_integral(s, lo, hi):
    """``int_lo^hi eta^-3 exp(-s^2/4eta) deta`` by quadrature in ``log eta``."""
    if hi == lo:
        return 0.0

    def g(u):
        eta = np.exp(u)
        return eta ** -2 * np.exp(-s * s / (4.0 * eta))

    return integrate(g, math.log(lo), math.log(hi), 1e-300, 1e-14)[0]


def identity_first(s, t):
    """Closed form of ``int_{s^2}^t eta^-3 exp(-s^2/4eta) deta``."""
    return 4.0 * (math.exp(-s * s / (4 * t)) * (s * s / t + 4.0) - 5.0 * math.exp(-0.25)) / s ** 4


def identity_second(s, t, t0):
    """Closed form of ``int_{t0}^t eta^-3 exp(-s^2/4eta) deta``."""
    return 4.0 * (math.exp(-s * s / (4 * t)) * (s * s / t + 4.0)
                  - math.exp(-s * s / (4 * t0)) * (4 * t0 + s * s) / t0) / s ** 4


def integral_identities_check(s, t, t0):
    """Absolute residuals ``(first, second)`` of the two eta-integral identities."""
    if not (s > 0 and t >= s * s and t >= t0 > 0):
        raise DomainError("need s > 0, t >= s^2 and t >= t0 > 0")
    r1 = abs(_eta_integral(s, s * s, t) - identity_first(s, t))
    r2 = abs(_eta_integral(s, t0, t) - identity_second(s, t, t0))
    return r1, r2


class FubiniResult(NamedTuple):
    iterated: float
    swapped: float
    residual: float


def fubini_check(theta0, t0, t, breakpoints=(), epsrel=1e-12):
    """Compare the time-first double integral with its swapped form.

    ``int_{t0}^t eta^-3 int_0^sqrt(eta) s^5 e^{-s^2/4eta} Theta_0 ds deta``
    against ``int_0^sqrt(t0) s^5 Theta_0 int_{t0}^t (...) deta ds +
    int_sqrt(t0)^sqrt(t) s^5 Theta_0 int_{s^2}^t (...) deta ds``; both
    sides by nested quadrature.  ``residual`` is relative.
    """
    if not t > t0 > 0:
        raise DomainError("need t > t0 > 0")
    datum = _Datum(theta0, breakpoints)
    sb = list(datum.breakpoints)

    def weight(s, eta):
        return eta ** -3 * s ** 5 * np.exp(-s * s / (4.0 * eta))

    # time-first: u = log eta outside, s inside
    ubps = [np.array([2.0 * math.log(b)]) for b in sb if t0 < b * b < t]

    def outer_t(u, _k):
        eta = np.exp(u)

        def inner(s, j):
            return weight(s, eta[j]) * datum(s)

        bps = [np.full(u.shape, b) for b in sb]
        v, _ = integrate_batch(inner, np.zeros_like(u), np.sqrt(eta), 1e-300, 1e-14, bps)
        return eta * v

    lhs = float(integrate_batch(outer_t, math.log(t0), math.log(t), 1e-300, epsrel, ubps)[0][0])

    def outer_s(s, _k):
        lo = np.where(s * s <= t0, t0, s * s)

        def inner(u, j):
            eta = np.exp(u)
            return eta * weight(s[j], eta)

        v, _ = integrate_batch(inner, np.log(lo), np.full(s.shape, math.log(t)), 1e-300, 1e-14)
        return v * datum(s)

    sbps = [np.array([b]) for b in sb if 0 < b < math.sqrt(t)] + [np.array([math.sqrt(t0)])]
    rhs = float(integrate_batch(outer_s, 0.0, math.sqrt(t), 1e-300, epsrel, sbps)[0][0])
    scale = max(abs(lhs), abs(rhs))
    return FubiniResult(lhs, rhs, abs(lhs - rhs) / scale if scale > 0 else 0.0)


# -- regime classification ------------------------------------------------

REGIMES = ("BlowUp", "BlowDown", "Oscillatory", "Bounded", "Inconclusive")


@dataclass(frozen=True)
class RegimeLabel:
    """Regime of a trace plus the fitted envelope exponent.

    ``exponent`` is ``p`` in ``log lam ~ alpha + beta (log(2+t))^p`` (NaN
    when no fit was made); ``r2`` is the fit's coefficient of determination.
    """

    regime: str
    exponent: float = float("nan")
    r2: float = float("nan")
    new_max: bool = False
    new_min: bool = False

    def to_dict(self, band=None):
        d = {"regime": self.regime,
             "fitted_exponent": None if math.isnan(self.exponent) else self.exponent,
             "band_residual": band}
        return d


def _record_flags(y, start, tol):
    run_max = np.maximum.accumulate(y)
    run_min = np.minimum.accumulate(y)
    new_max = bool(np.any(y[start:] > run_max[start - 1] + tol)) if start > 0 else False
    new_min = bool(np.any(y[start:] < run_min[start - 1] - tol)) if start > 0 else False
    return new_max, new_min


def fit_envelope(times, loglambda, p_grid=None):
    """Least-squares fit ``loglambda ~ alpha + beta (log(2+t))^p`` over ``p``.

    Returns ``(p, alpha, beta, r2)``.
    """
    from scipy.optimize import minimize_scalar

    x = np.log(2.0 + np.asarray(times, dtype=float))
    y = np.asarray(loglambda, dtype=float)
    sst = float(np.sum((y - y.mean()) ** 2))

    def sse(p):
        basis = np.column_stack([np.ones_like(x), x ** p])
        coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
        return float(np.sum((basis @ coef - y) ** 2)), coef

    grid = np.linspace(0.05, 2.0, 40) if p_grid is None else np.asarray(p_grid)
    errs = [sse(p)[0] for p in grid]
    k = int(np.argmin(errs))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = minimize_scalar(lambda p: sse(p)[0], bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-6})
    p = float(res.x)
    err, coef = sse(p)
    r2 = 1.0 - err / sst if sst > 0 else 1.0
    return p, float(coef[0]), float(coef[1]), r2


def classify_regime(trace, burn_in=0.2, threshold=0.5, min_r2=0.9, min_samples=100):
    """Label a modulation trace.

    * Oscillatory: after the burn-in window ``log lam`` sets both a new
      running maximum and a new running minimum.
    * Bounded: ``log lam`` moves by less than ``threshold`` after burn-in.
    * BlowUp / BlowDown: monotone drift of ``log lam`` down / up by more
      than ``threshold`` with an envelope fit of ``R^2 >= min_r2``
      (``||u||_inf = 2 lam^-2`` grows when ``lam`` shrinks).
    * Inconclusive otherwise.
    """
    n = len(trace)
    start = int(math.floor(burn_in * n))
    if n - start < min_samples:
        raise DomainError(f"need >= {min_samples} samples after burn-in, have {n - start}")
    y = trace.loglambda
    tail = y[start:]
    spread = float(np.max(y) - np.min(y))
    tol = 1e-9 + 1e-6 * spread
    new_max, new_min = _record_flags(y, start, tol)
    if new_max and new_min:
        return RegimeLabel("Oscillatory", float("nan"), float("nan"), True, True)
    if float(tail.max() - tail.min()) < threshold:
        return RegimeLabel("Bounded", float("nan"), float("nan"), new_max, new_min)
    p, _alpha, beta, r2 = fit_envelope(trace.times[start:], tail)
    if r2 < min_r2:
        return RegimeLabel("Inconclusive", p, r2, new_max, new_min)
    drift = tail[-1] - tail[0]
    regime = "BlowUp" if drift < 0 else "BlowDown"
    if (beta < 0) != (drift < 0):
        regime = "Inconclusive"
    return RegimeLabel(regime, p, r2, new_max, new_min)


def summary_json(label, band=None):
    """Stable-key JSON summary ``{regime, fitted_exponent, band_residual}``."""
    return json.dumps(label.to_dict(band), indent=2, sort_keys=True)
