# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled edge-sweep and prox kernels. Mirrors ``_pyimpl``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, pow

cnp.import_array()

BACKEND = "cython"


def edge_grad(cnp.int64_t[::1] src, cnp.int64_t[::1] dst, cnp.float64_t[::1] phi):
    cdef Py_ssize_t m = src.shape[0]
    out_arr = np.empty(m, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t e
    for e in range(m):
        out[e] = phi[src[e]] - phi[dst[e]]
    return out_arr


def edge_div(cnp.int64_t[::1] src, cnp.int64_t[::1] dst, cnp.float64_t[::1] vals, Py_ssize_t n):
    cdef Py_ssize_t m = src.shape[0]
    out_arr = np.zeros(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t e
    for e in range(m):
        out[src[e]] += vals[e]
        out[dst[e]] -= vals[e]
    return out_arr


def laplacian_apply(cnp.int64_t[::1] src, cnp.int64_t[::1] dst,
                    cnp.float64_t[::1] w, cnp.float64_t[::1] deg,
                    cnp.float64_t[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = src.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t i, e
    for i in range(n):
        out[i] = deg[i] * x[i]
    for e in range(m):
        out[src[e]] -= w[e] * x[dst[e]]
        out[dst[e]] -= w[e] * x[src[e]]
    return out_arr


def edge_laplacian_apply(cnp.int64_t[::1] src, cnp.int64_t[::1] dst,
                         cnp.float64_t[::1] ew, cnp.float64_t[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = src.shape[0]
    out_arr = np.zeros(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t e
    cdef double t
    for e in range(m):
        t = ew[e] * (x[src[e]] - x[dst[e]])
        out[src[e]] += t
        out[dst[e]] -= t
    return out_arr


cdef inline double _prox_scalar(double a, double c, double p) nogil:
    # solve x + c*x^(p-1) = a on [0, a]; monotone, bisection-safeguarded Newton
    cdef double lo = 0.0
    cdef double hi = a
    cdef double x = a
    cdef double tol = 1e-12 * (1.0 if a < 1.0 else a)
    cdef double h, dh, xn
    cdef int it
    if a == 0.0 or c == 0.0:
        return a
    for it in range(100):
        h = x + c * pow(x, p - 1.0) - a
        if fabs(h) <= tol:
            return x
        if h > 0.0:
            if x < hi:
                hi = x
        else:
            if x > lo:
                lo = x
        dh = 1.0 + c * (p - 1.0) * pow(x, p - 2.0)
        xn = x - h / dh
        if not (xn > lo and xn < hi):
            xn = 0.5 * (lo + hi)
        x = xn
    return x


def prox_power(cnp.float64_t[::1] v, cnp.float64_t[::1] tau, double p):
    cdef Py_ssize_t m = v.shape[0]
    out_arr = np.empty(m, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t e
    cdef double a, u
    if p == 1.0:
        for e in range(m):
            a = fabs(v[e]) - tau[e]
            out[e] = 0.0 if a <= 0.0 else (a if v[e] > 0.0 else -a)
        return out_arr
    if p == 2.0:
        for e in range(m):
            out[e] = v[e] / (1.0 + 2.0 * tau[e])
        return out_arr
    for e in range(m):
        a = fabs(v[e])
        u = _prox_scalar(a, tau[e] * p, p)
        out[e] = u if v[e] >= 0.0 else -u
    return out_arr
