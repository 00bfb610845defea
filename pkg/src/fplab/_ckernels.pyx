# cython: language_level=3
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, exp

cnp.import_array()

BACKEND = "cython"


# sums of squares outside this range may have under- or overflowed
cdef double SAFE_LO = 1e-280, SAFE_HI = 1e280


cdef double _scaled_l2(const double[::1] a, const double[::1] b, bint diff):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double m = 0.0, acc = 0.0, d
    for i in range(n):
        d = fabs(a[i] - b[i]) if diff else fabs(a[i])
        if d > m:
            m = d
    if m == 0.0 or m != m or m > 1.7976931348623157e308:
        return m
    for i in range(n):
        d = ((a[i] - b[i]) if diff else a[i]) / m
        acc += d * d
    return m * sqrt(acc)


def norm_l2(const double[::1] v):
    cdef Py_ssize_t i, n = v.shape[0]
    cdef double acc = 0.0
    for i in range(n):
        acc += v[i] * v[i]
    if SAFE_LO <= acc <= SAFE_HI:
        return sqrt(acc)
    return _scaled_l2(v, v, False)


def norm_linf(const double[::1] v):
    cdef Py_ssize_t i, n = v.shape[0]
    cdef double m = 0.0, a
    for i in range(n):
        a = fabs(v[i])
        if a > m:
            m = a
    return m


def dist_l2(const double[::1] a, const double[::1] b):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double acc = 0.0, d
    if b.shape[0] != n:
        raise ValueError("dimension mismatch")
    for i in range(n):
        d = a[i] - b[i]
        acc += d * d
    if SAFE_LO <= acc <= SAFE_HI:
        return sqrt(acc)
    return _scaled_l2(a, b, True)


def dist_linf(const double[::1] a, const double[::1] b):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double m = 0.0, d
    if b.shape[0] != n:
        raise ValueError("dimension mismatch")
    for i in range(n):
        d = fabs(a[i] - b[i])
        if d > m:
            m = d
    return m


def combine(const double[::1] a, const double[::1] b, double lam):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double mu = 1.0 - lam
    if b.shape[0] != n:
        raise ValueError("dimension mismatch")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = lam * a[i] + mu * b[i]
    return out


def linear_scale(const double[::1] x, double gamma):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = gamma * x[i]
    return out


def rotation_hard(const double[::1] x, double gamma, double s, bint literal):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double tail
    o[0] = s - gamma * x[n - 1]
    if literal:
        tail = gamma * x[n - 2]
        for i in range(1, n):
            o[i] = tail
    else:
        for i in range(1, n):
            o[i] = gamma * x[i - 1]
    return out


def piecewise_scale(const double[::1] x, double gamma, double c):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double knot = 1.0 - c
    cdef double shift = (gamma - 1.0) * knot
    cdef double v
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        v = x[i]
        if fabs(v) <= knot:
            o[i] = gamma * v
        elif v > 0:
            o[i] = v + shift
        else:
            o[i] = v - shift
    return out


def piecewise_slope(const double[::1] x, double m_near, double m_far, bint odd):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double t, g
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        t = fabs(x[i])
        if t <= 1.0:
            g = m_near * t
        else:
            g = m_near + m_far * (t - 1.0)
        if odd and x[i] < 0:
            g = -g
        o[i] = g
    return out


def ball_project(const double[::1] x, double radius):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double acc = 0.0, nrm, scale
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        acc += x[i] * x[i]
    nrm = sqrt(acc)
    if nrm <= radius:
        for i in range(n):
            o[i] = x[i]
    else:
        scale = radius / nrm
        for i in range(n):
            o[i] = x[i] * scale
    return out


def box_project(const double[::1] x, double lo, double hi):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double v
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        v = x[i]
        if v < lo:
            v = lo
        if v > hi:
            v = hi
        o[i] = v
    return out


def exp_shift(const double[::1] x, double alpha, double diameter):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double half = 0.5 * diameter, v
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        v = x[i] + exp(alpha * x[i] / diameter)
        if v < -half:
            v = -half
        if v > half:
            v = half
        o[i] = v
    return out
