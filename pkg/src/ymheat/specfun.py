"""Bessel functions J_nu and I_nu for real order nu >= 0 and argument x >= 0.

Evaluation strategy
-------------------
``I_nu``
    Positive-term power series for small and moderate arguments.  For
    ``x >= 20`` (and ``x >= nu**2 / 2``) the large-argument expansion of
    ``exp(-x) I_nu(x)`` is tried first; it is accepted only when its
    smallest term falls below 1e-17 relative, otherwise the series is used.
``J_nu``
    Power series for ``x <= 1``, Miller backward recurrence normalised by
    ``(x/2)^nu = sum_k (nu+2k) Gamma(nu+k)/k! J_{nu+2k}(x)`` up to
    ``x = max(25, nu**2)``, Hankel's asymptotic expansion beyond.

The heavy lifting lives in the compiled core (or its numpy twin).
"""

import math

import numpy as np

from ._backend import core
from .errors import DomainError


def _prep(nu, x):
    if not np.isfinite(nu) or nu < 0:
        raise DomainError(f"Bessel order must be a finite value >= 0, got {nu!r}")
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("Bessel argument must be >= 0")
    return float(nu), arr


def _apply(fn, nu, arr):
    flat = np.ascontiguousarray(arr.ravel())
    out = fn(nu, flat).reshape(arr.shape)
    return out if arr.ndim else float(out)


def bessel_i_scaled(nu, x):
    """Return ``exp(-x) * I_nu(x)``; finite for every finite ``x >= 0``."""
    nu, arr = _prep(nu, x)
    return _apply(core.ive, nu, arr)


def bessel_i(nu, x):
    """Modified Bessel function of the first kind, ``I_nu(x)``.

    Overflows to ``inf`` beyond x ~ 713; use :func:`bessel_i_scaled` there.
    """
    nu, arr = _prep(nu, x)
    with np.errstate(over="ignore"):
        return _apply(core.ive, nu, arr) * np.exp(arr)


def bessel_i_reduced(nu, x):
    """Return ``(x/2)**(-nu) * I_nu(x)``, an entire function equal to ``1/Gamma(nu+1)`` at 0."""
    nu, arr = _prep(nu, x)
    return _apply(core.ireduced, nu, arr)


def bessel_j(nu, x):
    """Bessel function of the first kind, ``J_nu(x)``."""
    nu, arr = _prep(nu, x)
    return _apply(core.jv, nu, arr)


def bessel_j_zeros(nu, count):
    """First ``count`` positive zeros of ``J_nu``.

    Sign changes are located on a grid of spacing 0.05 (zeros are at least
    ~pi apart) and polished with Brent's method.
    """
    from scipy.optimize import brentq

    nu = float(nu)
    if nu < 0:
        raise DomainError("order must be >= 0")
    upper = (count + 0.5 * nu + 2.0) * math.pi + 10.0
    grid = np.arange(0.05, upper, 0.05)
    vals = bessel_j(nu, grid)
    idx = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[:count]
    if idx.size < count:
        raise RuntimeError("zero scan window too short")
    return np.array([
        brentq(lambda z: float(bessel_j(nu, z)), grid[i], grid[i + 1], xtol=1e-14, rtol=1e-15)
        for i in idx
    ])
