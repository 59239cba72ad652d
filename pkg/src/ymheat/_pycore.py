"""Pure numpy fallback for :mod:`ymheat._core`.

Same algorithms and branch points as the compiled module, vectorised over
the argument array instead of looped in C.
"""

import math

import numpy as np
from scipy.linalg import solve_banded

EPS = 1e-17
ASYM_MIN_X = 20.0
J_SERIES_MAX_X = 1.0
J_ASYM_MIN_X = 25.0
REDUCED_MAX_XI = 2.0
MAX_TERMS = 100000


def _series_positive(nu, x, first):
    # sum of first * prod_{j<=k} (x^2/4)/(j(j+nu)); positive terms only
    q = 0.25 * x * x
    term = first.copy()
    total = first.copy()
    active = np.ones(x.shape, dtype=bool)
    k = 0
    while active.any() and k < MAX_TERMS:
        k += 1
        term[active] *= q[active] / (k * (k + nu))
        total[active] += term[active]
        done = ((term < EPS * total) & (k > 0.5 * x)) | ~np.isfinite(total)
        active &= ~done
    return total


def _ive_series(nu, x):
    first = np.exp(nu * np.log(0.5 * x) - math.lgamma(nu + 1.0) - x)
    return _series_positive(nu, x, first)


def _ive_asymptotic(nu, x):
    """Return (values, ok) where ok marks arguments whose expansion converged."""
    mu = 4.0 * nu * nu
    term = np.ones_like(x)
    total = np.ones_like(x)
    prev = np.ones_like(x)
    ok = np.ones(x.shape, dtype=bool)
    active = np.ones(x.shape, dtype=bool)
    k = 0
    while active.any():
        k += 1
        term = np.where(active, term * (-(mu - (2.0 * k - 1.0) ** 2) / (8.0 * k * x)), term)
        zero = active & (term == 0.0)
        active &= ~zero
        grew = active & (np.abs(term) > np.abs(prev))
        ok &= ~grew
        active &= ~grew
        total = np.where(active, total + term, total)
        prev = np.where(active, term, prev)
        conv = active & (np.abs(term) < EPS * np.abs(total))
        active &= ~conv
    return total / np.sqrt(2.0 * np.pi * x), ok


def ive(nu, x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    zero = x == 0.0
    out[zero] = 1.0 if nu == 0.0 else 0.0
    rest = ~zero
    asym = rest & (x >= ASYM_MIN_X) & (x >= 0.5 * nu * nu)
    if asym.any():
        vals, ok = _ive_asymptotic(nu, x[asym])
        idx = np.flatnonzero(asym)
        out[idx[ok]] = vals[ok]
        asym[idx[~ok]] = False
    ser = rest & ~asym
    if ser.any():
        out[ser] = _ive_series(nu, x[ser])
    return out


def ireduced(nu, x):
    x = np.asarray(x, dtype=float)
    first = np.full(x.shape, math.exp(-math.lgamma(nu + 1.0)))
    with np.errstate(over="ignore", invalid="ignore"):  # huge x overflows to inf, as in C
        return _series_positive(nu, x, first)


def _jv_series(nu, x):
    q = 0.25 * x * x
    term = np.exp(nu * np.log(0.5 * x) - math.lgamma(nu + 1.0))
    total = term.copy()
    active = np.ones(x.shape, dtype=bool)
    k = 0
    while active.any():
        k += 1
        term = np.where(active, -term * q / (k * (k + nu)), term)
        total = np.where(active, total + term, total)
        active &= ~(np.abs(term) < EPS * np.abs(total))
    return total


def _jv_miller(nu, x):
    m_top = (1.2 * x + 40.0).astype(int)
    m_top += m_top % 2
    start = int(m_top.max())
    f_next = np.zeros_like(x)
    f = np.zeros_like(x)
    norm = np.zeros_like(x)
    for m in range(start, 0, -1):
        f = np.where(m_top == m, 1e-300, f)
        if m % 2 == 0:
            k = m // 2
            coeff = (nu + 2.0 * k) * math.exp(math.lgamma(nu + k) - math.lgamma(k + 1.0))
            norm += coeff * f
        f_prev = 2.0 * (nu + m) / x * f - f_next
        f_next = f
        f = f_prev
        big = np.abs(f) > 1e250
        if big.any():
            f[big] *= 1e-250
            f_next[big] *= 1e-250
            norm[big] *= 1e-250
    norm += math.exp(math.lgamma(nu + 1.0)) * f
    return f * np.exp(nu * np.log(0.5 * x)) / norm


def _jv_asymptotic(nu, x):
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    prev = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    k = 0
    while active.any():
        k += 1
        term = np.where(active, term * (mu - (2.0 * k - 1.0) ** 2) / (8.0 * k * x), term)
        stop = active & ((np.abs(term) > np.abs(prev)) | (np.abs(term) < EPS))
        active &= ~stop
        prev = np.where(active, term, prev)
        if k % 2 == 0:
            sign = 1.0 if (k // 2) % 2 == 0 else -1.0
            p = np.where(active, p + sign * term, p)
        else:
            sign = 1.0 if ((k - 1) // 2) % 2 == 0 else -1.0
            q = np.where(active, q + sign * term, q)
    omega = x - 0.5 * nu * np.pi - 0.25 * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(omega) - q * np.sin(omega))


def jv(nu, x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    zero = x == 0.0
    out[zero] = 1.0 if nu == 0.0 else 0.0
    ser = ~zero & (x <= J_SERIES_MAX_X)
    asym = (x > J_ASYM_MIN_X) & (x > nu * nu)
    mil = ~zero & ~ser & ~asym
    if ser.any():
        out[ser] = _jv_series(nu, x[ser])
    if asym.any():
        out[asym] = _jv_asymptotic(nu, x[asym])
    if mil.any():
        out[mil] = _jv_miller(nu, x[mil])
    return out


def kernel_gamma(nu, r, s, t):
    r, s, t = (np.asarray(v, dtype=float) for v in (r, s, t))
    out = np.zeros_like(r)
    pos = s > 0.0
    xi = np.where(pos, r * s / (2.0 * t), 0.0)
    small = pos & (xi <= REDUCED_MAX_XI)
    large = pos & ~small
    if small.any():
        rs, ss, ts = r[small], s[small], t[small]
        out[small] = np.exp(
            (2.0 * nu + 1.0) * np.log(ss) - np.log(2.0 * ts) - nu * np.log(4.0 * ts)
            - (rs * rs + ss * ss) / (4.0 * ts)
        ) * ireduced(nu, xi[small])
    if large.any():
        rl, sl, tl = r[large], s[large], t[large]
        out[large] = np.exp(
            -nu * np.log(rl) + (nu + 1.0) * np.log(sl) - np.log(2.0 * tl)
            - (rl - sl) ** 2 / (4.0 * tl)
        ) * ive(nu, xi[large])
    return out


def solve_tridiagonal(lower, diag, upper, rhs):
    n = len(diag)
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs)

