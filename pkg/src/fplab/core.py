"""Ambient-space primitives and the counted evaluation oracle.

Vectors are plain contiguous float64 numpy arrays; :func:`as_vector` is the
validating constructor. Everything that queries an operator goes through
:class:`CountedOperator` so solver runs report exact oracle counts.
"""
import enum

import numpy as np

from . import kernels


class DimensionError(ValueError):
    """Vector or operator dimensions do not agree."""


class NonFiniteError(ArithmeticError):
    """An iterate or operator output contains NaN or Inf."""


class NormKind(str, enum.Enum):
    L2 = "l2"
    LINF = "linf"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"l2": cls.L2, "euclidean": cls.L2, "2": cls.L2,
                   "linf": cls.LINF, "sup": cls.LINF, "inf": cls.LINF}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown norm {value!r}") from None


def as_vector(coords, dim=None):
    """Return `coords` as a validated 1-D float64 array.

    Raises ``ValueError`` for empty input or non-finite entries and
    :class:`DimensionError` when `dim` is given and does not match.
    """
    v = np.ascontiguousarray(np.asarray(coords, dtype=np.float64).reshape(-1))
    if v.size == 0:
        raise ValueError("vectors need at least one coordinate")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite coordinates")
    if dim is not None and v.size != dim:
        raise DimensionError(f"expected dimension {dim}, got {v.size}")
    return v


def norm(v, kind=NormKind.L2):
    v = np.ascontiguousarray(v, dtype=np.float64)
    if NormKind.parse(kind) is NormKind.L2:
        return kernels.norm_l2(v)
    return kernels.norm_linf(v)


def distance(a, b, kind=NormKind.L2):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.size} vs {b.size}")
    if NormKind.parse(kind) is NormKind.L2:
        return kernels.dist_l2(a, b)
    return kernels.dist_linf(a, b)


def combine(a, b, lam):
    """Affine combination ``lam * a + (1 - lam) * b``."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.size} vs {b.size}")
    return kernels.combine(a, b, float(lam))


class CountedOperator:
    """Evaluation oracle around an operator spec.

    Each call to :meth:`evaluate` applies the spec once and increments
    ``queries`` by one. Not safe to share between threads during a run.

    Args:
        spec: An ``OperatorSpec`` from :mod:`fplab.operators`.
        norm: Norm used for residuals; defaults to the spec's declared norm.
    """

    def __init__(self, spec, norm=None):
        self.spec = spec
        self.norm = NormKind.parse(norm if norm is not None else spec.norm)
        self.queries = 0

    @property
    def dim(self):
        return self.spec.dim

    def evaluate(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != 1 or x.size != self.spec.dim:
            raise DimensionError(
                f"operator has dimension {self.spec.dim}, got input of size {x.size}")
        self.queries += 1
        return self.spec.apply(x)

    __call__ = evaluate

    def residual(self, x, tx):
        return residual(self, x, tx)

    def distance(self, a, b):
        return distance(a, b, self.norm)

    def __repr__(self):
        return f"CountedOperator({self.spec!r}, norm={self.norm.value}, queries={self.queries})"


def residual(op, x, tx):
    """Fixed-point residual ``||tx - x||`` under ``op.norm``.

    `tx` must be the cached value ``op(x)``; no oracle query is made.
    """
    return distance(tx, x, op.norm)
