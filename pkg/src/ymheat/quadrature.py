"""Batched adaptive Gauss-Kronrod quadrature.

Many one-dimensional integrals with different limits are refined together:
the integrand is called once per refinement sweep with every pending node of
every integral, so a Python-level loop runs only O(depth) times.  This is
what makes the nested Duhamel integrals in :mod:`ymheat.radialheat`
affordable.

The 21-point Kronrod extension of the 10-point Gauss rule is used, with the
QUADPACK error heuristic.
"""

import numpy as np

from .errors import QuadratureError

# Kronrod abscissae (non-negative half), Kronrod weights, Gauss weights on odd slots
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525685844,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(21)
GAUSS_WEIGHTS[1:10:2] = _WG
GAUSS_WEIGHTS[11:20:2] = _WG[::-1]

_EPMACH = np.finfo(float).eps
_UFLOW = np.finfo(float).tiny


def _panel_rule(func, a, b, owner):
    """Apply the 21-point rule to panels [a, b]; return (value, error)."""
    center = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = (center[:, None] + half[:, None] * NODES[None, :]).ravel()
    fx = np.asarray(func(x, np.repeat(owner, 21)), dtype=float).reshape(-1, 21)
    resk = fx @ KRONROD_WEIGHTS
    resg = fx @ GAUSS_WEIGHTS
    reskh = 0.5 * resk
    resabs = np.abs(fx) @ KRONROD_WEIGHTS
    resasc = np.abs(fx - reskh[:, None]) @ KRONROD_WEIGHTS
    ahalf = np.abs(half)
    value = resk * half
    resabs *= ahalf
    resasc *= ahalf
    err = np.abs((resk - resg) * half)
    with np.errstate(invalid="ignore", divide="ignore"):
        scaled = np.where(
            (resasc != 0.0) & (err != 0.0),
            resasc * np.minimum(1.0, (200.0 * err / np.where(resasc == 0, 1, resasc)) ** 1.5),
            err,
        )
    floor = np.where(resabs > _UFLOW / (50 * _EPMACH), 50 * _EPMACH * resabs, 0.0)
    err = np.maximum(scaled, floor)
    if not (np.all(np.isfinite(value)) and np.all(np.isfinite(err))):
        bad = ~(np.isfinite(value) & np.isfinite(err))
        raise QuadratureError(
            f"non-finite integrand on {int(bad.sum())} panel(s), first at "
            f"[{a[bad][0]!r}, {b[bad][0]!r}]"
        )
    return value, err


def integrate_batch(func, lo, hi, epsabs=1e-10, epsrel=1e-10, breakpoints=None,
                    limit=4000, strict=True):
    """Integrate ``func`` over ``[lo[k], hi[k]]`` for every k at once.

    Parameters
    ----------
    func : callable
        ``func(x, k)`` with ``x`` a 1-D array of abscissae and ``k`` the
        matching integer array of integral indices; returns an array of the
        same length.
    lo, hi : array_like
        Limits, broadcast to a common 1-D shape.  ``hi < lo`` integrates
        with reversed sign; ``hi == lo`` gives 0.
    epsabs, epsrel : float
        Each integral stops refining once its error estimate is below
        ``max(epsabs, epsrel * |value|)``.
    breakpoints : sequence of array_like, optional
        Extra initial split points per integral (values outside the
        interval are ignored).  Put them at discontinuities and peaks.
    limit : int
        Maximum number of panels per integral.
    strict : bool
        Raise :class:`QuadratureError` when an integral cannot meet its
        tolerance; otherwise return the best estimate.

    Returns
    -------
    values, errors : ndarray
    """
    lo, hi = np.broadcast_arrays(np.atleast_1d(np.asarray(lo, dtype=float)),
                                 np.atleast_1d(np.asarray(hi, dtype=float)))
    lo = lo.ravel().copy()
    hi = hi.ravel().copy()
    m = lo.size
    sign = np.where(hi < lo, -1.0, 1.0)
    a_lim = np.minimum(lo, hi)
    b_lim = np.maximum(lo, hi)

    pts = [a_lim[:, None], b_lim[:, None]]
    if breakpoints is not None:
        for bp in breakpoints:
            bp = np.broadcast_to(np.asarray(bp, dtype=float), (m,))
            pts.append(np.clip(bp, a_lim, b_lim)[:, None])
    grid = np.sort(np.concatenate(pts, axis=1), axis=1)
    pa = grid[:, :-1].ravel()
    pb = grid[:, 1:].ravel()
    pown = np.repeat(np.arange(m), grid.shape[1] - 1)
    keep = pb > pa
    pa, pb, pown = pa[keep], pb[keep], pown[keep]

    store_a = np.empty(0)
    store_b = np.empty(0)
    store_o = np.empty(0, dtype=int)
    store_v = np.empty(0)
    store_e = np.empty(0)
    frozen = np.zeros(0, dtype=bool)

    while pa.size:
        v, e = _panel_rule(func, pa, pb, pown)
        store_a = np.concatenate([store_a, pa])
        store_b = np.concatenate([store_b, pb])
        store_o = np.concatenate([store_o, pown])
        store_v = np.concatenate([store_v, v])
        store_e = np.concatenate([store_e, e])
        # panels too narrow to bisect in floating point
        width_ok = (pb - pa) > 64 * _EPMACH * np.maximum(np.abs(pa), np.abs(pb))
        frozen = np.concatenate([frozen, ~width_ok])

        total = np.bincount(store_o, weights=store_v, minlength=m)
        err = np.bincount(store_o, weights=store_e, minlength=m)
        count = np.bincount(store_o, minlength=m)
        tol = np.maximum(epsabs, epsrel * np.abs(total))
        need = err > tol
        if not need.any():
            break
        share = tol / np.maximum(count, 1)
        split = need[store_o] & (store_e > share[store_o]) & ~frozen
        over = need & (count >= limit)
        split &= ~over[store_o]
        if not split.any():
            break
        mid = 0.5 * (store_a[split] + store_b[split])
        pa = np.concatenate([store_a[split], mid])
        pb = np.concatenate([mid, store_b[split]])
        pown = np.concatenate([store_o[split], store_o[split]])
        keep_mask = ~split
        store_a, store_b, store_o = store_a[keep_mask], store_b[keep_mask], store_o[keep_mask]
        store_v, store_e, frozen = store_v[keep_mask], store_e[keep_mask], frozen[keep_mask]

    total = np.bincount(store_o, weights=store_v, minlength=m)
    err = np.bincount(store_o, weights=store_e, minlength=m)
    if strict:
        tol = np.maximum(epsabs, epsrel * np.abs(total))
        # allow a rounding margin on integrals limited by the floating-point floor
        failed = err > 2.0 * tol
        if failed.any():
            k = int(np.flatnonzero(failed)[0])
            raise QuadratureError(
                f"{int(failed.sum())} integral(s) missed tolerance; e.g. #{k} on "
                f"[{a_lim[k]!r}, {b_lim[k]!r}]: value {total[k]!r}, error {err[k]!r}"
            )
    return sign * total, err


def integrate(f, a, b, epsabs=1e-10, epsrel=1e-10, breakpoints=(), limit=4000, strict=True):
    """Adaptive integral of a vectorised scalar function ``f`` over [a, b].

    ``b`` may be ``np.inf``; the half-line is mapped onto [0, 1) by
    ``x = a + u / (1 - u)``.  Breakpoints are given in the original variable.

    Returns
    -------
    value, error : float
    """
    if np.isinf(b):
        if b < 0:
            raise ValueError("only [a, +inf) is supported")

        def g(u, _k):
            w = 1.0 - u
            return f(a + u / w) / (w * w)

        bps = [np.array([(p - a) / (1.0 + p - a)]) for p in breakpoints if p > a]
        v, e = integrate_batch(g, 0.0, 1.0, epsabs, epsrel, bps, limit, strict)
    else:
        bps = [np.array([p]) for p in breakpoints]
        v, e = integrate_batch(lambda x, _k: f(x), a, b, epsabs, epsrel, bps, limit, strict)
    return float(v[0]), float(e[0])
