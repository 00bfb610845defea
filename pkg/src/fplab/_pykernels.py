"""Numpy implementations of the hot kernels.

Every function takes and returns contiguous 1-D float64 arrays and never
mutates its inputs. The compiled module ``_ckernels`` exposes the same names
and signatures.
"""
import numpy as np

BACKEND = "python"


# sums of squares outside this range may have under- or overflowed
_SAFE_LO, _SAFE_HI = 1e-280, 1e280


def norm_l2(v):
    acc = float(np.dot(v, v))
    if _SAFE_LO <= acc <= _SAFE_HI:
        return float(np.sqrt(acc))
    m = float(np.max(np.abs(v))) if v.size else 0.0
    if m == 0.0 or not np.isfinite(m):
        return m
    w = v / m
    return m * float(np.sqrt(np.dot(w, w)))


def norm_linf(v):
    if v.size == 0:
        return 0.0
    return float(np.max(np.abs(v)))


def dist_l2(a, b):
    return norm_l2(a - b)


def dist_linf(a, b):
    return float(np.max(np.abs(a - b)))


def combine(a, b, lam):
    return lam * a + (1.0 - lam) * b


def linear_scale(x, gamma):
    return gamma * x


def rotation_hard(x, gamma, s, literal):
    out = np.empty_like(x)
    out[0] = s - gamma * x[-1]
    if literal:
        out[1:] = gamma * x[-2]
    else:
        out[1:] = gamma * x[:-1]
    return out


def piecewise_scale(x, gamma, c):
    knot = 1.0 - c
    inner = np.abs(x) <= knot
    return np.where(inner, gamma * x, x + np.sign(x) * ((gamma - 1.0) * knot))


def piecewise_slope(x, m_near, m_far, odd):
    t = np.abs(x)
    g = np.where(t <= 1.0, m_near * t, m_near + m_far * (t - 1.0))
    if odd:
        return np.sign(x) * g
    return g


def ball_project(x, radius):
    n = float(np.sqrt(np.dot(x, x)))
    if n <= radius:
        return x.copy()
    return x * (radius / n)


def box_project(x, lo, hi):
    return np.minimum(np.maximum(x, lo), hi)


def exp_shift(x, alpha, diameter):
    half = 0.5 * diameter
    return np.minimum(np.maximum(x + np.exp(alpha * x / diameter), -half), half)
