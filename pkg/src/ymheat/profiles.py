"""Explicit profiles of the soliton problem and the initial-data families.

Soliton family ``U_lam(r) = 2 / (r^2 + lam^2)``, dilation mode
``Z(rho) = (1 + rho^2)^-2``, the linearised potential around ``U = U_1``,
the cutoff ``eta_R``, the nonlinear remainder and the data ``Theta_0``.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np

from .errors import ConfigError, DomainError, GridWarning
from .grid import RadialProfile, radial_laplacian, read_columns

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class SolitonParams:
    lam: float = 1.0

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError("soliton scale must be a finite value > 0")


def _lam(p):
    return p.lam if isinstance(p, SolitonParams) else SolitonParams(float(p)).lam


def soliton(p, r):
    """``U_lam(r) = 2 / (r^2 + lam^2)``; ``p`` is a :class:`SolitonParams` or a scale."""
    lam = _lam(p)
    return 2.0 / (np.asarray(r, dtype=float) ** 2 + lam * lam)


def soliton_dlam(p, r):
    """Derivative of ``U_lam(r)`` with respect to ``lam``."""
    lam = _lam(p)
    return -4.0 * lam / (np.asarray(r, dtype=float) ** 2 + lam * lam) ** 2


def zmode(rho):
    """Dilation zero mode ``(1 + rho^2)^-2`` (equals ``-dU_lam/dlam / 4`` at lam = 1)."""
    return 1.0 / (1.0 + np.asarray(rho, dtype=float) ** 2) ** 2


def potential(rho):
    """Closed form ``24 (1 + rho^2)^-2`` of the linearised potential."""
    return 24.0 / (1.0 + np.asarray(rho, dtype=float) ** 2) ** 2


def lin_potential(rho):
    """``12 U - 6 rho^2 U^2`` at ``U = U_1(rho)``, evaluated from its definition."""
    rho = np.asarray(rho, dtype=float)
    u = soliton(1.0, rho)
    return 12.0 * u - 6.0 * rho * rho * u * u


def reaction(u, r):
    """Reaction term ``6 u^2 - 2 r^2 u^3`` of the reduced flow."""
    return (6.0 - 2.0 * r * r * u) * u * u


def stationarity_residual(p, nodes):
    """Discrete ``U'' + (5/r) U' + 6U^2 - 2r^2 U^3`` of ``U_lam`` on ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    u = soliton(p, nodes)
    return radial_laplacian(u, nodes, 6) + reaction(u, nodes)


# -- cutoff ---------------------------------------------------------------

def cutoff(x, deriv=0):
    """Quintic smoothstep cutoff: 1 on ``|x| <= 1``, 0 on ``|x| >= 2``, C^2 in between.

    ``deriv`` in {0, 1, 2} returns the corresponding derivative.
    """
    x = np.abs(np.asarray(x, dtype=float))
    y = np.clip(x - 1.0, 0.0, 1.0)
    if deriv == 0:
        return 1.0 - y ** 3 * (10.0 - 15.0 * y + 6.0 * y * y)
    if deriv == 1:
        return -30.0 * y * y * (1.0 - y) ** 2
    if deriv == 2:
        return -60.0 * y * (1.0 - y) * (1.0 - 2.0 * y)
    raise ValueError("deriv must be 0, 1 or 2")


@dataclass(frozen=True)
class CutoffSpec:
    """Inner radius scale; ``eta_R(rho) = cutoff(rho / R)``."""

    R: float

    def __post_init__(self):
        if not self.R > 1.0:
            raise DomainError("cutoff radius must exceed 1")

    @classmethod
    def at_time(cls, t):
        return cls(inner_radius(t))

    def __call__(self, rho, deriv=0):
        return cutoff(np.asarray(rho, dtype=float) / self.R, deriv) / self.R ** deriv


def inner_radius(t):
    """Run-time inner radius ``(log t)^(1/100)``; needs ``t > e``."""
    if not t > math.e:
        raise DomainError("inner radius policy needs t > e")
    return math.log(t) ** 0.01


# -- nonlinearity ---------------------------------------------------------

def inner_contribution(phi, lam, r, R):
    """``eta_R lam^-2 phi(r / lam)`` for a callable inner profile ``phi``."""
    rho = np.asarray(r, dtype=float) / lam
    return cutoff(rho / R) * phi(rho) / (lam * lam)


def nonlinearity_N(lam, theta, phi_contrib, psi, r):
    """Nonlinear remainder of the reaction around ``U_lam``.

    ``w = theta + phi_contrib + psi`` where ``phi_contrib`` is the already
    cut-off, rescaled inner correction (see :func:`inner_contribution`).
    Uses the exact factorisation ``(6 - 6 r^2 U_lam) w^2 - 2 r^2 w^3``,
    which avoids the cancellation of the expanded definition.
    """
    r = np.asarray(r, dtype=float)
    u = soliton(lam, r)
    w = np.asarray(theta, dtype=float) + phi_contrib + psi
    return (6.0 - 6.0 * r * r * u) * w * w - 2.0 * r * r * w ** 3


def nonlinearity_N_expanded(lam, theta, phi_contrib, psi, r):
    """Same quantity from the defining difference (reference form)."""
    r = np.asarray(r, dtype=float)
    u = soliton(lam, r)
    w = np.asarray(theta, dtype=float) + phi_contrib + psi
    v = u + w
    return (6.0 * v * v - 2.0 * r * r * v ** 3 - 6.0 * u * u + 2.0 * r * r * u ** 3
            - (12.0 * u - 6.0 * r * r * u * u) * w)


# -- inner linear operator ------------------------------------------------

def inner_linear_apply(phi, tol=1e-3, check=True):
    """Apply ``L[phi] = phi'' + (5/rho) phi' + (12U - 6rho^2U^2) phi`` on a rho-grid.

    Central differences with the origin regularity stencil.  When ``check``
    is set, the result is compared with the same stencil on every other
    node; a Richardson error estimate above ``tol`` (relative to
    ``max |L[phi]|`` or 1) triggers a :class:`GridWarning`.
    """
    if not isinstance(phi, RadialProfile):
        raise TypeError("inner_linear_apply expects a RadialProfile")
    rho = phi.r
    vals = radial_laplacian(phi.values, rho, phi.grid.dimension) + lin_potential(rho) * phi.values
    if check and rho.size >= 9:
        coarse = radial_laplacian(phi.values[::2], rho[::2], phi.grid.dimension) \
            + lin_potential(rho[::2]) * phi.values[::2]
        # skip the one-sided end stencil, which is first order
        est = np.max(np.abs(coarse[:-2] - vals[::2][:-2])) / 3.0
        scale = max(1.0, float(np.max(np.abs(vals))))
        if est > tol * scale:
            warnings.warn(f"inner operator stencil error estimate {est:.3g} exceeds {tol:g}",
                          GridWarning, stacklevel=2)
    return phi.with_values(vals)


# -- initial data ---------------------------------------------------------

FAMILIES = {
    "powerlog": "PowerLog",
    "oscillatory": "OscillatoryExplicit",
    "oscillatoryexplicit": "OscillatoryExplicit",
    "custom-table": "Custom-table",
    "table": "Custom-table",
    "custom": "Custom-table",
}


@dataclass(frozen=True)
class Theta0Spec:
    """Initial datum for the free heat part.

    Families
    --------
    PowerLog
        ``sign * amplitude / ((2 + r^2) log(2 + r^2)^a)``.
    OscillatoryExplicit
        ``amplitude * ((1-a) cos(log l) - sin(log l)) / ((2 + r^2) l^a)`` with
        ``l = log(2 + r^2)``; its weighted moment has the closed form
        ``int_0^S s Theta_0 ds = amplitude/2 * [l^(1-a) cos(log l)]`` between
        ``l = log 2`` and ``l = log(2 + S^2)``.
    Custom-table
        Cubic spline through a ``r,value`` CSV table, zero beyond the last node.
    """

    family: str = "PowerLog"
    a: float = 0.5
    sign: int = 1
    amplitude: float = 1.0
    table_path: str = None

    def __post_init__(self):
        fam = FAMILIES.get(str(self.family).lower().replace("_", "-"), None)
        if fam is None:
            raise DomainError(f"unknown theta0 family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if not 0.0 < self.a < 1.0:
            raise DomainError("theta0 decay exponent a must lie in (0, 1)")
        if self.sign not in (1, -1):
            raise DomainError("theta0 sign must be +1 or -1")
        if not (self.amplitude > 0 and math.isfinite(self.amplitude)):
            raise DomainError("theta0 amplitude must be > 0")
        if fam == "Custom-table":
            if not self.table_path:
                raise DomainError("Custom-table data needs a table_path")
            object.__setattr__(self, "_table", _load_table(self.table_path, self.a))

    @classmethod
    def from_config(cls, cfg):
        """Build from flat keys ``theta0.family``, ``.a``, ``.sign``, ``.amplitude``, ``.table_path``."""
        get = cfg.get
        sign = str(get("theta0.sign", "+")).strip()
        signs = {"+": 1, "-": -1, "+1": 1, "-1": -1, "1": 1, "positive": 1, "negative": -1}
        if sign not in signs:
            raise ConfigError(f"theta0.sign must be '+' or '-', got {sign!r}")
        try:
            return cls(family=get("theta0.family", "PowerLog"), a=float(get("theta0.a", 0.5)),
                       sign=signs[sign], amplitude=float(get("theta0.amplitude", 1.0)),
                       table_path=get("theta0.table_path", None))
        except (DomainError, ValueError, OSError) as exc:
            raise ConfigError(f"invalid theta0 settings: {exc}") from None

    @property
    def signed_amplitude(self):
        return self.sign * self.amplitude if self.family == "PowerLog" else self.amplitude

    def __call__(self, r):
        return self.scaled(r, 0.0)

    def scaled(self, x, log_t):
        """Return ``t * Theta_0(sqrt(t) x)`` with ``t = exp(log_t)`` without overflow."""
        x = np.asarray(x, dtype=float)
        if self.family == "Custom-table":
            t = math.exp(log_t)
            return t * self._table(math.sqrt(t) * x)
        with np.errstate(divide="ignore"):
            lx2 = np.where(x > 0, 2.0 * np.log(np.where(x > 0, x, 1.0)), -np.inf)
        ell = np.logaddexp(LOG2, log_t + lx2)  # log(2 + t x^2)
        base = np.exp(log_t - ell) * ell ** (-self.a)
        if self.family == "PowerLog":
            return self.sign * self.amplitude * base
        ll = np.log(ell)
        return self.amplitude * base * ((1.0 - self.a) * np.cos(ll) - np.sin(ll))

    def moment(self, upper):
        """``int_0^upper s Theta_0(s) ds``."""
        upper = float(upper)
        if self.family == "Custom-table":
            from .quadrature import integrate
            return integrate(lambda s: s * self._table(s), 0.0, upper, 1e-13, 1e-12,
                             breakpoints=tuple(p for p in self._table.nodes if p < upper))[0]
        return self.moment_log(math.log(2.0 + upper * upper))

    def moment_log(self, ell):
        """Closed-form moment as a function of ``ell = log(2 + upper^2)``."""
        if self.family == "Custom-table":
            raise DomainError("log-form moment only exists for the closed-form families")
        b = 1.0 - self.a
        if self.family == "PowerLog":
            return 0.5 * self.sign * self.amplitude * (ell ** b - LOG2 ** b) / b
        return 0.5 * self.amplitude * (ell ** b * math.cos(math.log(ell))
                                       - LOG2 ** b * math.cos(math.log(LOG2)))

    def breakpoints(self):
        return tuple(self._table.nodes) if self.family == "Custom-table" else ()

    def describe(self):
        d = {"family": self.family, "a": self.a, "amplitude": self.amplitude}
        if self.family == "PowerLog":
            d["sign"] = "+" if self.sign > 0 else "-"
        if self.table_path:
            d["table_path"] = str(self.table_path)
        return d


class _Table:
    def __init__(self, nodes, values):
        from scipy.interpolate import CubicSpline

        self.nodes = np.asarray(nodes, dtype=float)
        self.r_max = float(self.nodes[-1])
        self._spline = CubicSpline(self.nodes, values, bc_type=((1, 0.0), "not-a-knot"))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return np.where(s <= self.r_max, self._spline(np.minimum(s, self.r_max)), 0.0)


def envelope_ratio(r, values, a):
    """``|Theta_0(r)| r^2 (log r)^a`` on ``r > e`` (the decay-class envelope)."""
    r = np.asarray(r, dtype=float)
    keep = r > math.e
    return r[keep], np.abs(np.asarray(values)[keep]) * r[keep] ** 2 * np.log(r[keep]) ** a


def _load_table(path, a, growth=10.0):
    header, cols = read_columns(path)
    if len(header) != 2 or header[0] != "r":
        raise DomainError(f"{path}: expected header 'r,value'")
    r, v = cols
    if r[0] != 0.0 or np.any(np.diff(r) <= 0):
        raise DomainError(f"{path}: radii must start at 0 and increase")
    if not np.all(np.isfinite(v)):
        raise DomainError(f"{path}: non-finite values")
    rr, env = envelope_ratio(r, v, a)
    if rr.size >= 4:
        # the upper envelope may not grow along the table: slower decay than
        # r^-2 (log r)^-a would leave the admissible data class
        half = rr.size // 2
        first, last = env[:half].max(), env[half:].max()
        if first > 0 and last > growth * first:
            raise DomainError(f"{path}: tail decays slower than r^-2 (log r)^-{a:g} "
                              f"(envelope grows {last / first:.3g}x)")
    return _Table(r, v)
