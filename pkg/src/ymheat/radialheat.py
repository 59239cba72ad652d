"""Free heat propagation of radial functions in R^n.

The radial heat kernel

    Gamma_n(r, s; t) = r^{(2-n)/2} s^{n/2} / (2t) * exp(-(r^2+s^2)/4t) * I_{(n-2)/2}(rs/2t)

is evaluated in log space from the exponentially scaled Bessel function, so
it stays finite for any ``rs/2t`` (the ``exp(rs/2t)`` growth of ``I`` is
cancelled analytically against the Gaussian).  Near ``r = 0`` the reduced
Bessel function gives the exact limit ``s^{n-1} exp(-s^2/4t) / (2t (4t)^nu Gamma(nu+1))``,
which in six dimensions is ``s^5 exp(-s^2/4t) / (64 t^3)``.
"""

import math

import numpy as np

from ._backend import core
from .errors import DomainError
from .grid import RadialGrid, RadialProfile
from .quadrature import integrate_batch
from .specfun import bessel_j, bessel_j_zeros

# Gaussian tails beyond this many sqrt(t) are below 1e-24 of the peak
TAIL_WIDTHS = 16.0


def kernel_gamma(n, r, s, t):
    """Radial heat kernel ``Gamma_n(r, s; t)`` (broadcasts over arrays)."""
    r, s, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(s, dtype=float),
                                  np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise DomainError("kernel time must be > 0")
    if np.any(r < 0) or np.any(s < 0):
        raise DomainError("radii must be >= 0")
    nu = 0.5 * (n - 2)
    shape = r.shape
    out = core.kernel_gamma(nu, *(np.ascontiguousarray(v.ravel()) for v in (r, s, t)))
    out = out.reshape(shape)
    return out if shape else float(out)


def _kernel_flat(nu, r, s, t):
    return core.kernel_gamma(nu, np.ascontiguousarray(r, dtype=float),
                             np.ascontiguousarray(s, dtype=float),
                             np.ascontiguousarray(t, dtype=float))


def _s_window(r, tau):
    # the lower end stays at 0: against decaying data the product peaks
    # well inside the kernel ridge, so only the upper tail is cut
    return np.zeros_like(r), r + TAIL_WIDTHS * np.sqrt(tau)


def _kernel_breakpoints(r, tau, n):
    sq = np.sqrt(tau)
    return [r, r - 2 * sq, r + 2 * sq, r - 5 * sq, r + 5 * sq, np.sqrt(2.0 * (n - 1) * tau)]


def _as_callable(data):
    if isinstance(data, RadialProfile):
        return data.interpolant(), [np.array(data.grid.r_max)]
    if callable(data):
        return data, []
    raise TypeError("initial datum must be a RadialProfile or a callable")


def heat_evolve(data, t0, t, out_grid, n=None, epsabs=1e-9, epsrel=1e-10,
                breakpoints=(), limit=4000):
    """Solve ``Theta_t = Theta_rr + (n-1)/r Theta_r`` from ``Theta(., t0) = data``.

    Parameters
    ----------
    data : RadialProfile or callable
        Initial datum.  Tables are spline-interpolated and taken as zero
        beyond their last node.
    t0, t : float
        Start and evaluation time, ``t > t0``.
    out_grid : RadialGrid or array_like
        Radii at which to return the solution.
    n : int, optional
        Space dimension; defaults to the grid dimension (or 6).
    epsabs, epsrel : float
        Quadrature tolerance per output node.
    breakpoints : sequence of float
        Points where the datum is not smooth.

    Returns
    -------
    RadialProfile, or ndarray when ``out_grid`` is a plain array.
    """
    if not t > t0:
        raise DomainError("heat_evolve needs t > t0")
    grid = out_grid if isinstance(out_grid, RadialGrid) else None
    r = grid.nodes if grid is not None else np.atleast_1d(np.asarray(out_grid, dtype=float))
    if n is None:
        n = grid.dimension if grid is not None else 6
    f, extra = _as_callable(data)
    tau = float(t - t0)
    nu = 0.5 * (n - 2)
    rr = np.asarray(r, dtype=float)

    def integrand(s, k):
        return _kernel_flat(nu, rr[k], s, np.full(s.shape, tau)) * f(s)

    lo, hi = _s_window(rr, tau)
    bps = _kernel_breakpoints(rr, tau, n) + [np.full(rr.shape, float(b)) for b in breakpoints] + \
        [np.broadcast_to(b, rr.shape) for b in extra]
    vals, _ = integrate_batch(integrand, lo, hi, epsabs, epsrel, bps, limit)
    if grid is None:
        return vals
    return RadialProfile(grid, vals, float(t))


def duhamel_out(forcing, t0, t, out_grid, n=None, epsabs=1e-7, epsrel=1e-8,
                forcing_breakpoints=None, limit=4000):
    """Inhomogeneous heat propagator with zero data at ``t0``.

    Returns ``int_{t0}^{t} int_0^inf Gamma_n(r, s; t - sigma) f(s, sigma) ds dsigma``.
    The forcing is taken to vanish before ``t0``.

    Parameters
    ----------
    forcing : callable
        ``f(s, sigma)`` on arrays of equal shape.
    forcing_breakpoints : callable, optional
        ``forcing_breakpoints(sigma)`` returns a list of arrays (same shape
        as ``sigma``) of radii where ``f(., sigma)`` has a jump or kink.

    Notes
    -----
    The time range is split at its midpoint.  The recent half uses
    ``sigma = t - u^2`` to absorb the narrowing of the kernel as
    ``sigma -> t``; the early half is parametrised by ``sigma - t0`` so that
    forcing concentrated just after ``t0`` stays resolved when ``t >> t0``.
    Inner radial integrals for every time node of a refinement sweep are
    refined together.
    """
    if t < t0:
        raise DomainError("duhamel_out needs t >= t0")
    grid = out_grid if isinstance(out_grid, RadialGrid) else None
    r = grid.nodes if grid is not None else np.atleast_1d(np.asarray(out_grid, dtype=float))
    r = np.asarray(r, dtype=float)
    if n is None:
        n = grid.dimension if grid is not None else 6
    nu = 0.5 * (n - 2)
    span = float(t - t0)
    if span == 0.0:
        vals = np.zeros_like(r)
        return RadialProfile(grid, vals, float(t)) if grid is not None else vals

    inner_abs = 0.1 * epsabs / span
    inner_rel = 0.1 * epsrel

    def radial(tau, sigma, k):
        rk = r[k]
        lo, hi = _s_window(rk, tau)
        bps = _kernel_breakpoints(rk, tau, n)
        if forcing_breakpoints is not None:
            bps = bps + [np.asarray(b, dtype=float) for b in forcing_breakpoints(sigma)]

        def inner(s, j):
            return _kernel_flat(nu, rk[j], s, tau[j]) * forcing(s, sigma[j])

        # an inner integral stuck at its floating-point floor is far below
        # the outer tolerance once weighted by 2u du; only the outer sum is strict
        vals, _ = integrate_batch(inner, lo, hi, inner_abs, inner_rel, bps, limit, strict=False)
        return vals

    half = 0.5 * span

    def recent(u, k):
        # sigma in [t - half, t]; t - u^2 is exact enough here
        tau = u * u
        return 2.0 * u * radial(tau, t - tau, k)

    def early(y, k):
        # sigma in [t0, t0 + half], measured from t0 to keep its resolution
        sigma = t0 + y
        return radial(t - sigma, sigma, k)

    umax = math.sqrt(half)
    fracs = [0.6, 0.3, 0.1]
    while umax * fracs[-1] > 1e-2 and fracs[-1] > 1e-30:
        fracs.append(fracs[-1] * 0.1)
    ubps = [np.full(r.shape, umax * f) for f in fracs]
    late_vals, _ = integrate_batch(recent, np.zeros_like(r), np.full(r.shape, umax),
                                   0.5 * epsabs, epsrel, ubps, limit)
    fracs = [0.3, 0.1]
    floor = 1e-3 * max(abs(t0), 1.0)
    while half * fracs[-1] > floor and fracs[-1] > 1e-30:
        fracs.append(fracs[-1] * 0.1)
    ybps = [np.full(r.shape, half * f) for f in fracs]
    early_vals, _ = integrate_batch(early, np.zeros_like(r), np.full(r.shape, half),
                                    0.5 * epsabs, epsrel, ybps, limit)
    vals = late_vals + early_vals
    if grid is None:
        return vals
    return RadialProfile(grid, vals, float(t))


def hankel_evolve(data, support, t, r, n=6, domain=None, quad_nodes=400):
    """Heat evolution through a Fourier-Bessel (discrete Hankel) expansion.

    Writes ``v = r^nu u`` with ``nu = (n-2)/2`` and expands ``v`` on the
    Dirichlet eigenfunctions ``J_nu(j_k r / L)`` of ``[0, L]``; each mode
    decays as ``exp(-(j_k/L)^2 t)``.  Valid while the evolved datum is
    negligible at ``L``; intended as an independent check of
    :func:`heat_evolve` for data supported in ``[0, support]``.
    """
    nu = 0.5 * (n - 2)
    L = domain if domain is not None else support + 30.0 * math.sqrt(t) + 10.0
    jmax = L * math.sqrt(45.0 / t)
    count = int((jmax / math.pi) - 0.5 * nu + 2)
    zeros = bessel_j_zeros(nu, max(count, 1))
    zeros = zeros[zeros <= jmax]
    xg, wg = np.polynomial.legendre.leggauss(quad_nodes)
    s = 0.5 * support * (xg + 1.0)
    ws = 0.5 * support * wg
    u0 = np.asarray(data(s), dtype=float)
    k = zeros / L
    basis = bessel_j(nu, np.outer(k, s))
    norm = 2.0 / (L * L * bessel_j(nu + 1.0, zeros) ** 2)
    coeff = norm * (basis @ (ws * s ** (nu + 1.0) * u0))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    decay = coeff * np.exp(-(k ** 2) * t)
    out = np.empty_like(r)
    pos = r > 0
    if pos.any():
        out[pos] = (bessel_j(nu, np.outer(r[pos], k)) @ decay) / r[pos] ** nu
    if (~pos).any():
        out[~pos] = np.sum(decay * (0.5 * k) ** nu) / math.gamma(nu + 1.0)
    return out
