# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: weighted KDE on a grid, CRPS quadrature, and the
double-seasonal smoothing filter. Twin of ``numpy_backend.py``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs

cnp.import_array()

NAME = "compiled"

cdef double _INV_SQRT_2PI = 0.3989422804014327
cdef double _TRUNCATION = 8.0


def kde_on_grid(double[::1] values, double[::1] weights,
                double[::1] grid, double[::1] h_grid):
    """Weighted Gaussian KDE evaluated at every grid point."""
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t m = grid.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(m, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, t
    cdef double g, h, acc, u
    for i in range(m):
        g = grid[i]
        h = h_grid[i]
        acc = 0.0
        for t in range(n):
            u = (values[t] - g) / h
            if fabs(u) <= _TRUNCATION:
                acc += weights[t] * exp(-0.5 * u * u)
        ov[i] = acc * _INV_SQRT_2PI / h
    return out


cdef inline double _seg(double width, double fa, double fb) noexcept:
    return width / 3.0 * (fa * fa + fa * fb + fb * fb)


def crps_grid(double[::1] xs, double[::1] cdf, double obs):
    """CRPS of the piecewise-linear CDF anchored at (0, 0) on the grid
    nodes, constant 1 beyond the last point. Exact per-segment quadrature
    with the cell containing the observation split at the observation."""
    cdef Py_ssize_t n = xs.shape[0]
    cdef double total = 0.0
    cdef double a = 0.0, fa = 0.0
    cdef double b, fb, c, fo
    cdef Py_ssize_t i
    for i in range(n):
        b = xs[i]
        fb = cdf[i]
        if a < obs < b:
            fo = fa + (fb - fa) * (obs - a) / (b - a)
            total += _seg(obs - a, fa, fo)
            total += _seg(b - obs, fo - 1.0, fb - 1.0)
        else:
            c = 1.0 if a >= obs else 0.0
            total += _seg(b - a, fa - c, fb - c)
        a = b
        fa = fb
    if obs > a:
        # CDF is constant at its final value beyond the grid.
        total += _seg(obs - a, fa, fa)
    return total


def hwt_filter(double[::1] y, long[::1] d_idx, long[::1] w_idx,
               double alpha, double delta, double omega, double phi,
               double level, double last_error,
               double[::1] intraday, double[::1] intraweek,
               double[::1] err_out):
    """Double-seasonal error-correction recursion; seasonal arrays and
    ``err_out`` are updated in place, returns (level, last_error)."""
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t t
    cdef long d, w
    cdef double e
    for t in range(n):
        d = d_idx[t]
        w = w_idx[t]
        e = y[t] - (level + intraday[d] + intraweek[w] + phi * last_error)
        level += alpha * e
        intraday[d] += delta * e
        intraweek[w] += omega * e
        last_error = e
        err_out[t] = e
    return level, last_error
