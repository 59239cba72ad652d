# cython: language_level=3
"""Compiled kernels: Bessel functions, the radial heat kernel and a tridiagonal solver.

Every routine here has a numpy twin in :mod:`ymheat._pycore`; the two are
selected at import time by :mod:`ymheat._backend` and must agree to
rounding error.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, cos, sin, lgamma, fabs, floor, M_PI, INFINITY

cnp.import_array()

cdef double EPS = 1e-17
cdef double ASYM_MIN_X = 20.0
cdef double J_SERIES_MAX_X = 1.0
cdef double J_ASYM_MIN_X = 25.0
cdef double REDUCED_MAX_XI = 2.0


cdef double _ive_series(double nu, double x) nogil:
    # e^{-x} sum (x/2)^{2k+nu} / (k! Gamma(k+nu+1)); all terms positive
    cdef double q = 0.25 * x * x
    cdef double term = exp(nu * log(0.5 * x) - lgamma(nu + 1.0) - x)
    cdef double total = term
    cdef int k = 0
    while True:
        k += 1
        term *= q / (k * (k + nu))
        total += term
        if term < EPS * total and k > 0.5 * x:
            break
        if k > 100000:
            break
    return total


cdef int _ive_asymptotic(double nu, double x, double *out) nogil:
    # returns 1 and writes e^{-x} I_nu(x) when the divergent series converges to EPS
    cdef double mu = 4.0 * nu * nu
    cdef double term = 1.0
    cdef double total = 1.0
    cdef double prev = 1.0
    cdef int k = 0
    while True:
        k += 1
        term *= -(mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * x)
        if term == 0.0:
            break
        if fabs(term) > fabs(prev):
            return 0
        total += term
        prev = term
        if fabs(term) < EPS * fabs(total):
            break
    out[0] = total / sqrt(2.0 * M_PI * x)
    return 1


cdef double ive_scalar(double nu, double x) nogil:
    cdef double val
    if x == 0.0:
        return 1.0 if nu == 0.0 else 0.0
    if x >= ASYM_MIN_X and x >= 0.5 * nu * nu:
        if _ive_asymptotic(nu, x, &val):
            return val
    return _ive_series(nu, x)


cdef double ireduced_scalar(double nu, double x) nogil:
    # (x/2)^{-nu} I_nu(x), entire in x
    cdef double q = 0.25 * x * x
    cdef double term = exp(-lgamma(nu + 1.0))
    cdef double total = term
    cdef int k = 0
    while True:
        k += 1
        term *= q / (k * (k + nu))
        total += term
        if term < EPS * total and k > 0.5 * x:
            break
        if total == INFINITY or k > 100000:  # overflow: the series cannot settle
            break
    return total


cdef double _jv_series(double nu, double x) nogil:
    cdef double q = 0.25 * x * x
    cdef double term = exp(nu * log(0.5 * x) - lgamma(nu + 1.0))
    cdef double total = term
    cdef int k = 0
    while True:
        k += 1
        term *= -q / (k * (k + nu))
        total += term
        if fabs(term) < EPS * fabs(total):
            break
    return total


cdef double _jv_miller(double nu, double x) nogil:
    # backward recurrence normalised by (x/2)^nu = sum_k (nu+2k) Gamma(nu+k)/k! J_{nu+2k}
    cdef int m_top = <int>(1.2 * x + 40.0)
    if m_top % 2 == 1:
        m_top += 1
    cdef double f_next = 0.0
    cdef double f = 1e-300
    cdef double f_prev
    cdef double norm = 0.0
    cdef double coeff
    cdef int m, k
    for m in range(m_top, 0, -1):
        if m % 2 == 0:
            k = m // 2
            coeff = (nu + 2.0 * k) * exp(lgamma(nu + k) - lgamma(k + 1.0))
            norm += coeff * f
        f_prev = 2.0 * (nu + m) / x * f - f_next
        f_next = f
        f = f_prev
        if fabs(f) > 1e250:
            f *= 1e-250
            f_next *= 1e-250
            norm *= 1e-250
    norm += exp(lgamma(nu + 1.0)) * f
    return f * exp(nu * log(0.5 * x)) / norm


cdef double _jv_asymptotic(double nu, double x) nogil:
    cdef double mu = 4.0 * nu * nu
    cdef double p = 1.0
    cdef double q = 0.0
    cdef double term = 1.0
    cdef double prev = 1.0
    cdef int k = 0
    while True:
        k += 1
        term *= (mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * x)
        if fabs(term) > fabs(prev) or fabs(term) < EPS:
            break
        prev = term
        # a_k / x^k enters P with sign (-1)^{k/2} for even k, Q with (-1)^{(k-1)/2} for odd k
        if k % 2 == 0:
            if (k // 2) % 2 == 0:
                p += term
            else:
                p -= term
        else:
            if ((k - 1) // 2) % 2 == 0:
                q += term
            else:
                q -= term
    cdef double omega = x - 0.5 * nu * M_PI - 0.25 * M_PI
    return sqrt(2.0 / (M_PI * x)) * (p * cos(omega) - q * sin(omega))


cdef double jv_scalar(double nu, double x) nogil:
    if x == 0.0:
        return 1.0 if nu == 0.0 else 0.0
    if x <= J_SERIES_MAX_X:
        return _jv_series(nu, x)
    if x > J_ASYM_MIN_X and x > nu * nu:
        return _jv_asymptotic(nu, x)
    return _jv_miller(nu, x)


cdef double kernel_scalar(double nu, double r, double s, double t) nogil:
    cdef double xi
    if s <= 0.0:
        return 0.0
    xi = r * s / (2.0 * t)
    if xi <= REDUCED_MAX_XI:
        return exp((2.0 * nu + 1.0) * log(s) - log(2.0 * t) - nu * log(4.0 * t)
                   - (r * r + s * s) / (4.0 * t)) * ireduced_scalar(nu, xi)
    return exp(-nu * log(r) + (nu + 1.0) * log(s) - log(2.0 * t)
               - (r - s) * (r - s) / (4.0 * t)) * ive_scalar(nu, xi)


def ive(double nu, double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = ive_scalar(nu, x[i])
    return out


def ireduced(double nu, double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = ireduced_scalar(nu, x[i])
    return out


def jv(double nu, double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = jv_scalar(nu, x[i])
    return out


def kernel_gamma(double nu, double[::1] r, double[::1] s, double[::1] t):
    cdef Py_ssize_t i, n = r.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = kernel_scalar(nu, r[i], s[i], t[i])
    return out


def solve_tridiagonal(double[::1] lower, double[::1] diag, double[::1] upper, double[::1] rhs):
    """Thomas algorithm; ``lower[0]`` and ``upper[n-1]`` are ignored."""
    cdef Py_ssize_t i, n = diag.shape[0]
    cdef double[::1] cp = np.empty(n)
    out = np.empty(n)
    cdef double[::1] x = out
    cdef double denom
    with nogil:
        denom = diag[0]
        cp[0] = upper[0] / denom if n > 1 else 0.0
        x[0] = rhs[0] / denom
        for i in range(1, n):
            denom = diag[i] - lower[i] * cp[i - 1]
            if i < n - 1:
                cp[i] = upper[i] / denom
            x[i] = (rhs[i] - lower[i] * x[i - 1]) / denom
        for i in range(n - 2, -1, -1):
            x[i] -= cp[i] * x[i + 1]
    return out
