"""Benchmark operators, combinators and seeded domain samplers.

Operator specs are immutable values. ``spec.apply(x)`` evaluates the map
without any accounting; wrap a spec in :class:`fplab.core.CountedOperator`
to query it as an oracle.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import DimensionError, NormKind, as_vector


@dataclass(frozen=True)
class Box:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty box [{self.lo}, {self.hi}]")

    def project(self, x):
        return kernels.box_project(x, float(self.lo), float(self.hi))

    def diameter(self, dim, norm):
        side = self.hi - self.lo
        return side if NormKind.parse(norm) is NormKind.LINF else side * math.sqrt(dim)


@dataclass(frozen=True)
class Ball:
    """Euclidean ball of the given radius centred at the origin."""

    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    def project(self, x):
        return kernels.ball_project(x, float(self.radius))

    def diameter(self, dim, norm):
        return 2.0 * self.radius


class OperatorSpec:
    """Base class: a map on R^dim with declared norm and optional metadata.

    Attributes:
        dim: Dimension of the space.
        norm: The :class:`NormKind` residuals and Lipschitz ratios use.
        lipschitz: Known Lipschitz constant under ``norm``, or None.
        diameter: Diameter of an invariant domain, or None.
    """

    dim: int
    norm: NormKind
    lipschitz = None
    diameter = None

    def apply(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.apply(as_vector(x, self.dim))


def _check_dim(dim):
    if int(dim) != dim or dim < 1:
        raise ValueError(f"dimension must be a positive integer, got {dim!r}")
    return int(dim)


@dataclass(frozen=True)
class Identity(OperatorSpec):
    dim: int
    norm: NormKind = NormKind.L2
    lipschitz: float = 1.0

    def apply(self, x):
        return x.copy()


@dataclass(frozen=True)
class LinearScale(OperatorSpec):
    """T(x) = gamma * x. ``gamma = 0`` gives the zero operator."""

    dim: int
    gamma: float
    norm: NormKind = NormKind.L2

    @property
    def lipschitz(self):
        return abs(self.gamma)

    def apply(self, x):
        return kernels.linear_scale(x, self.gamma)


@dataclass(frozen=True, eq=False)
class Affine(OperatorSpec):
    """T(x) = A x + b for a dense square matrix A."""

    matrix: np.ndarray
    offset: np.ndarray
    norm: NormKind = NormKind.L2

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def lipschitz(self):
        if self.norm is NormKind.L2:
            return float(np.linalg.norm(self.matrix, 2))
        return float(np.abs(self.matrix).sum(axis=1).max())

    def apply(self, x):
        return self.matrix @ x + self.offset


@dataclass(frozen=True)
class RotationHard(OperatorSpec):
    """Cyclic shift with a sign-flipped, shifted first coordinate.

    ``out[0] = s - gamma * x[-1]`` and ``out[i] = gamma * x[i-1]`` for i >= 1.
    With ``literal=True`` every trailing coordinate is ``gamma * x[-2]``
    instead (the rank-two reading of the formula, kept for comparison).
    """

    dim: int
    gamma: float
    s: float
    literal: bool = False
    norm: NormKind = NormKind.L2

    @property
    def lipschitz(self):
        if self.literal:
            return self.gamma * math.sqrt(self.dim - 1)
        return self.gamma

    def apply(self, x):
        return kernels.rotation_hard(x, self.gamma, self.s, self.literal)

    def fixed_point(self):
        """Closed-form fixed point of the shift variant."""
        if self.literal:
            raise ValueError("closed form only for the cyclic-shift variant")
        g = self.gamma
        x1 = self.s / (1.0 + g ** self.dim)
        return x1 * g ** np.arange(self.dim, dtype=np.float64)


@dataclass(frozen=True)
class PiecewiseScale(OperatorSpec):
    """Coordinatewise gamma*x inside |x| <= 1-c, unit slope outside."""

    dim: int
    gamma: float
    c: float
    norm: NormKind = NormKind.L2

    @property
    def lipschitz(self):
        return self.gamma

    def apply(self, x):
        return kernels.piecewise_scale(x, self.gamma, self.c)


@dataclass(frozen=True)
class PiecewiseSlope(OperatorSpec):
    """Coordinatewise f(x) = g(|x|), slope m_near on [0, 1] and m_far beyond.

    ``odd=True`` uses sign(x) * g(|x|) instead of the even extension.
    """

    dim: int
    m_near: float
    m_far: float
    odd: bool = False
    norm: NormKind = NormKind.L2

    @property
    def lipschitz(self):
        return max(self.m_near, self.m_far)

    def apply(self, x):
        return kernels.piecewise_slope(x, self.m_near, self.m_far, self.odd)


@dataclass(frozen=True)
class BallProjection(OperatorSpec):
    dim: int
    radius: float = 1.0
    norm: NormKind = NormKind.L2
    lipschitz: float = 1.0

    @property
    def diameter(self):
        return 2.0 * self.radius

    def apply(self, x):
        return kernels.ball_project(x, self.radius)


@dataclass(frozen=True)
class BoxProjection(OperatorSpec):
    dim: int
    lo: float
    hi: float
    norm: NormKind = NormKind.LINF
    lipschitz: float = 1.0

    @property
    def diameter(self):
        return Box(self.lo, self.hi).diameter(self.dim, self.norm)

    def apply(self, x):
        return kernels.box_project(x, self.lo, self.hi)


@dataclass(frozen=True)
class ExpShift(OperatorSpec):
    """clip(x + exp(alpha * x / D), -D/2, D/2) coordinatewise, sup norm."""

    dim: int
    alpha: float
    D: float
    norm: NormKind = NormKind.LINF

    @property
    def diameter(self):
        return self.D

    @property
    def lipschitz(self):
        # derivative of the unclipped map peaks at the clipping point x = D/2
        return 1.0 + self.alpha / self.D * math.exp(self.alpha / 2.0)

    def apply(self, x):
        return kernels.exp_shift(x, self.alpha, self.D)


@dataclass(frozen=True)
class Compose(OperatorSpec):
    """Composition; the last part is applied first."""

    parts: tuple
    norm: NormKind = NormKind.L2

    @property
    def dim(self):
        return self.parts[0].dim

    @property
    def lipschitz(self):
        gammas = [p.lipschitz for p in self.parts]
        if any(g is None for g in gammas):
            return None
        return math.prod(gammas)

    @property
    def diameter(self):
        return self.parts[0].diameter

    def apply(self, x):
        for part in reversed(self.parts):
            x = part.apply(x)
        return x


@dataclass(frozen=True)
class ProjectedForwardStep(OperatorSpec):
    """T(x) = Proj_region(x - F(x))."""

    F: OperatorSpec
    region: object
    norm: NormKind = NormKind.L2

    @property
    def dim(self):
        return self.F.dim

    @property
    def lipschitz(self):
        if self.F.lipschitz is None:
            return None
        return 1.0 + self.F.lipschitz

    @property
    def diameter(self):
        return self.region.diameter(self.dim, self.norm)

    def apply(self, x):
        return self.region.project(x - self.F.apply(x))


@dataclass(frozen=True)
class Displacement(OperatorSpec):
    """F(x) = T(x) - x for a wrapped operator T."""

    T: OperatorSpec

    @property
    def dim(self):
        return self.T.dim

    @property
    def norm(self):
        return self.T.norm

    @property
    def lipschitz(self):
        if self.T.lipschitz is None:
            return None
        return 1.0 + self.T.lipschitz

    def apply(self, x):
        return self.T.apply(x) - x


# constructors ----------------------------------------------------------------

def make_identity(d, norm=NormKind.L2):
    return Identity(_check_dim(d), NormKind.parse(norm))


def make_linear_scale(gamma, d=1, norm=NormKind.L2):
    return LinearScale(_check_dim(d), float(gamma), NormKind.parse(norm))


def make_affine(matrix, offset=None, norm=NormKind.L2):
    A = np.array(matrix, dtype=np.float64, ndmin=2)
    if A.shape[0] != A.shape[1]:
        raise DimensionError("affine operator needs a square matrix")
    b = np.zeros(A.shape[0]) if offset is None else as_vector(offset, A.shape[0])
    return Affine(A, b, NormKind.parse(norm))


def default_shift(d, gamma):
    """Shift used by the rotation benchmarks: 2/sqrt(d) if gamma == 1 else 2."""
    return 2.0 / math.sqrt(d) if gamma == 1 else 2.0


def make_rotation_hard(d, gamma, s=None, literal=False):
    d = _check_dim(d)
    if d < 2:
        raise ValueError("rotation operator needs d >= 2")
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if s is None:
        s = default_shift(d, gamma)
    return RotationHard(d, float(gamma), float(s), bool(literal))


def make_piecewise_scale(gamma, c, d=1):
    if not gamma > 1:
        raise ValueError("piecewise scale needs gamma > 1; use make_linear_scale otherwise")
    if not 0 <= c <= 1:
        raise ValueError(f"c must lie in [0, 1], got {c}")
    return PiecewiseScale(_check_dim(d), float(gamma), float(c))


def make_piecewise_slope(m_near, m_far, d=1, odd=False):
    for name, m in (("m_near", m_near), ("m_far", m_far)):
        if not 0 < m <= 1:
            raise ValueError(f"{name} must lie in (0, 1], got {m}")
    return PiecewiseSlope(_check_dim(d), float(m_near), float(m_far), bool(odd))


def make_ball_projection(d, radius=1.0):
    return BallProjection(_check_dim(d), float(radius))


def make_box_projection(d, lo, hi):
    Box(lo, hi)
    return BoxProjection(_check_dim(d), float(lo), float(hi))


def make_exp_shift(alpha, D, d=1):
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if not D > 0:
        raise ValueError("D must be positive")
    return ExpShift(_check_dim(d), float(alpha), float(D))


def make_compose(parts, norm=None):
    parts = tuple(parts)
    if not parts:
        raise ValueError("compose needs at least one operator")
    dims = {p.dim for p in parts}
    if len(dims) != 1:
        raise DimensionError(f"composed operators disagree on dimension: {sorted(dims)}")
    return Compose(parts, NormKind.parse(norm if norm is not None else parts[0].norm))


def make_projected_forward_step(F, region, norm=NormKind.L2):
    if not isinstance(region, (Box, Ball)):
        raise TypeError("region must be a Box or a Ball")
    return ProjectedForwardStep(F, region, NormKind.parse(norm))


def make_displacement(T):
    return Displacement(T)


def make_rotation_slope(d, m_near, m_far, s=None, odd=False):
    """R_1 composed with the coordinatewise piecewise slope map."""
    return make_compose([make_rotation_hard(d, 1.0, s), make_piecewise_slope(m_near, m_far, d, odd)])


def make_ball_rotation_scale(d, gamma, c, s=None):
    """Ball projection after R_1 after the piecewise scale map."""
    return make_compose([
        make_ball_projection(d),
        make_rotation_hard(d, 1.0, s),
        make_piecewise_scale(gamma, c, d),
    ])


# name -> (builder, parameter names with defaults); used by the config format
REGISTRY = {
    "identity": (lambda p: make_identity(p["d"], p["norm"]), {"d": 1, "norm": "l2"}),
    "linear_scale": (lambda p: make_linear_scale(p["gamma"], p["d"], p["norm"]),
                     {"gamma": None, "d": 1, "norm": "l2"}),
    "zero": (lambda p: make_linear_scale(0.0, p["d"]), {"d": 1}),
    "rotation_hard": (lambda p: make_rotation_hard(p["d"], p["gamma"], p["s"], p["literal"]),
                      {"d": None, "gamma": None, "s": None, "literal": False}),
    "piecewise_scale": (lambda p: make_piecewise_scale(p["gamma"], p["c"], p["d"]),
                        {"gamma": None, "c": None, "d": 1}),
    "piecewise_slope": (lambda p: make_piecewise_slope(p["m_near"], p["m_far"], p["d"], p["odd"]),
                        {"m_near": None, "m_far": None, "d": 1, "odd": False}),
    "ball_projection": (lambda p: make_ball_projection(p["d"], p["radius"]),
                        {"d": None, "radius": 1.0}),
    "box_projection": (lambda p: make_box_projection(p["d"], p["lo"], p["hi"]),
                       {"d": None, "lo": None, "hi": None}),
    "exp_shift": (lambda p: make_exp_shift(p["alpha"], p["D"], p["d"]),
                  {"alpha": None, "D": None, "d": 1}),
    "rotation_slope": (lambda p: make_rotation_slope(p["d"], p["m_near"], p["m_far"], p["s"], p["odd"]),
                       {"d": None, "m_near": None, "m_far": None, "s": None, "odd": False}),
    "ball_rotation_scale": (lambda p: make_ball_rotation_scale(p["d"], p["gamma"], p["c"], p["s"]),
                            {"d": None, "gamma": None, "c": None, "s": None}),
}

_INT_PARAMS = {"d"}
_BOOL_PARAMS = {"literal", "odd"}
_STR_PARAMS = {"norm"}


def build_operator(name, params=None):
    """Build a registered operator from a name and a parameter mapping.

    String values (as read from a config file) are converted to the
    parameter's type. Unknown or missing parameters raise ``KeyError``.
    """
    try:
        builder, defaults = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown operator {name!r}") from None
    params = dict(params or {})
    unknown = set(params) - set(defaults)
    if unknown:
        raise KeyError(f"unknown parameter(s) for operator {name!r}: {', '.join(sorted(unknown))}")
    resolved = {}
    for key, default in defaults.items():
        if key in params:
            resolved[key] = coerce_param(key, params[key])
        elif default is None and key != "s":
            raise KeyError(f"operator {name!r} requires parameter {key!r}")
        else:
            resolved[key] = default
    return builder(resolved)


def coerce_param(key, value):
    if not isinstance(value, str):
        return value
    if key in _INT_PARAMS:
        return int(value)
    if key in _BOOL_PARAMS:
        if value.lower() in ("1", "true", "yes"):
            return True
        if value.lower() in ("0", "false", "no"):
            return False
        raise ValueError(f"bad boolean for {key}: {value!r}")
    if key in _STR_PARAMS:
        return value
    return float(value)


# sampling --------------------------------------------------------------------

@dataclass
class DomainSampler:
    """Seeded uniform sampler over a box ``[lo, hi]^dim`` or an l2 ball.

    Uses numpy's PCG64 generator, so a given (seed, region, dim) always
    yields the same sequence.
    """

    region: object
    dim: int
    seed: int = 42
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        _check_dim(self.dim)
        self._rng = np.random.default_rng(self.seed)

    def sample(self, n=None):
        """One point (shape ``(dim,)``) or ``n`` points (shape ``(n, dim)``)."""
        m = 1 if n is None else n
        if isinstance(self.region, Box):
            pts = self._rng.uniform(self.region.lo, self.region.hi, size=(m, self.dim))
        else:
            g = self._rng.standard_normal((m, self.dim))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            r = self.region.radius * self._rng.uniform(size=(m, 1)) ** (1.0 / self.dim)
            pts = g * r
        return pts[0] if n is None else pts

    def pairs(self, n):
        return self.sample(n), self.sample(n)
