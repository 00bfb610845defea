"""Sampling-based property checkers and closed-form iteration-count bounds.

Checkers draw seeded pairs from a :class:`~fplab.operators.DomainSampler`,
evaluate the operator through a counted oracle, and return a
:class:`CheckReport`. A failing report always carries a witness pair that
:func:`reproduce` can re-test.

Bound evaluators return :class:`BoundResult`. When a log argument is at most
one the iteration count is 0 (already converged); when the count overflows
``K_MAX`` it is saturated and flagged.
"""
import math
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import CountedOperator, NormKind

NEAR_ZERO = 1e-12
REL_SLACK = 1e-9
K_MAX = sys.maxsize
_CHUNK = 4096


class GammaOutOfRange(ValueError):
    """The Lipschitz constant lies outside the range a bound covers."""


@dataclass
class CheckReport:
    """Outcome of one sampled property check.

    ``worst_ratio`` is the largest observed ratio of the left side of the
    tested inequality to its right side (for Lipschitz estimation simply the
    largest difference quotient). ``witness`` is the violating pair with the
    largest such ratio when ``passed`` is False.
    """

    name: str
    passed: bool
    samples_tested: int
    worst_ratio: float
    witness: tuple = None
    tolerance: float = 0.0
    seed: int = None
    skipped: int = 0
    inconclusive: bool = False
    params: dict = field(default_factory=dict)

    def to_record(self):
        rec = asdict(self)
        if self.witness is not None:
            rec["witness"] = [np.asarray(w).tolist() for w in self.witness]
        for key, value in list(rec.items()):
            if isinstance(value, float) and not math.isfinite(value):
                rec[key] = repr(value)
        return rec


def _oracle(op):
    return op if isinstance(op, CountedOperator) else CountedOperator(op)


def _rownorm(v, kind):
    if kind is NormKind.L2:
        return np.sqrt(np.einsum("ij,ij->i", v, v))
    return np.max(np.abs(v), axis=1)


def _apply_rows(oracle, pts):
    return np.stack([oracle.evaluate(p) for p in pts])


def _seed_of(sampler):
    return getattr(sampler, "seed", None)


def _sweep(oracle, sampler, n_pairs, margin_fn):
    """Evaluate ``margin_fn`` on chunks of sampled pairs.

    ``margin_fn(x, y, tx, ty)`` returns ``(ratio, violation, valid)`` arrays:
    the reported ratio, the amount by which the inequality is violated
    (positive means failure) and a mask of pairs that count as tested. The
    witness is the violating pair with the largest ratio.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    tested = skipped = 0
    worst_ratio = -math.inf
    witness_ratio = -math.inf
    witness = None
    done = 0
    while done < n_pairs:
        m = min(_CHUNK, n_pairs - done)
        done += m
        x, y = sampler.pairs(m)
        tx, ty = _apply_rows(oracle, x), _apply_rows(oracle, y)
        ratio, violation, valid = margin_fn(x, y, tx, ty)
        tested += int(valid.sum())
        skipped += int((~valid).sum())
        if not valid.any():
            continue
        r = np.where(valid, ratio, -np.inf)
        i = int(np.argmax(r))
        worst_ratio = max(worst_ratio, float(r[i]))
        bad = valid & (violation > 0)
        if bad.any():
            rb = np.where(bad, ratio, -np.inf)
            j = int(np.argmax(rb))
            if witness is None or rb[j] > witness_ratio:
                witness_ratio = float(rb[j])
                witness = (x[j].copy(), y[j].copy())
    if worst_ratio == -math.inf:
        worst_ratio = 0.0
    return tested, skipped, worst_ratio, witness


def estimate_lipschitz(op, sampler, n_pairs=100_000, gamma=None, rel_tol=REL_SLACK):
    """Largest sampled difference quotient ``||Tx - Ty|| / ||x - y||``.

    Pairs closer than 1e-12 are skipped. With ``gamma`` given the report
    passes iff no quotient exceeds ``gamma * (1 + rel_tol)``; otherwise it
    always passes and only the estimate is of interest.
    """
    oracle = _oracle(op)
    kind = oracle.norm
    limit = math.inf if gamma is None else gamma * (1.0 + rel_tol)

    def margin(x, y, tx, ty):
        dx = _rownorm(x - y, kind)
        valid = dx >= NEAR_ZERO
        ratio = _rownorm(tx - ty, kind) / np.where(valid, dx, 1.0)
        return ratio, ratio - limit, valid

    tested, skipped, worst, witness = _sweep(oracle, sampler, n_pairs, margin)
    return CheckReport("lipschitz", witness is None, tested, worst, witness, rel_tol,
                       _seed_of(sampler), skipped,
                       params={"gamma": gamma, "norm": kind.value})


def _gradual_parts(x, y, tx, ty, kind, D, alpha):
    dx = _rownorm(x - y, kind)
    lhs = _rownorm(tx - ty, kind)
    rmax = np.maximum(_rownorm(tx - x, kind), _rownorm(ty - y, kind))
    rhs = (1.0 + alpha * rmax / D) * dx
    return dx, lhs, rhs


def check_gradually_expansive(op, D, alpha, sampler, n_pairs=100_000, tol=1e-10):
    """Test ``||Tx-Ty|| <= (1 + alpha*max(||Tx-x||, ||Ty-y||)/D) ||x-y||``.

    A pair violates the property when the left side exceeds the right side
    by more than the additive slack ``tol``.
    """
    oracle = _oracle(op)
    kind = oracle.norm

    def margin(x, y, tx, ty):
        dx, lhs, rhs = _gradual_parts(x, y, tx, ty, kind, D, alpha)
        valid = dx >= NEAR_ZERO
        return lhs / np.where(valid, rhs, 1.0), lhs - rhs - tol, valid

    tested, skipped, worst, witness = _sweep(oracle, sampler, n_pairs, margin)
    return CheckReport("gradually_expansive", witness is None, tested, worst, witness, tol,
                       _seed_of(sampler), skipped,
                       params={"D": D, "alpha": alpha, "norm": kind.value})


def check_F_condition(opF, D, alpha, sampler, n_pairs=100_000, tol=1e-10):
    """Test ``||Fx-Fy|| <= (alpha/D) max(||Fx||, ||Fy||) ||x-y||``.

    When this holds for F = T - Id, the triangle inequality gives the
    gradual-expansion inequality for T on the same pair.
    """
    oracle = _oracle(opF)
    kind = oracle.norm

    def margin(x, y, fx, fy):
        dx = _rownorm(x - y, kind)
        lhs = _rownorm(fx - fy, kind)
        rhs = alpha / D * np.maximum(_rownorm(fx, kind), _rownorm(fy, kind)) * dx
        valid = dx >= NEAR_ZERO
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0),
                             np.where(lhs > 0, np.inf, 0.0))
        return ratio, lhs - rhs - tol, valid

    tested, skipped, worst, witness = _sweep(oracle, sampler, n_pairs, margin)
    return CheckReport("F_condition", witness is None, tested, worst, witness, tol,
                       _seed_of(sampler), skipped,
                       params={"D": D, "alpha": alpha, "norm": kind.value})


def _require_l2(oracle, what):
    if oracle.norm is not NormKind.L2:
        raise ValueError(f"{what} needs the l2 inner product, operator uses {oracle.norm.value}")


def check_hypomonotone(opF, mu, sampler, n_pairs=100_000, tol=REL_SLACK):
    """Test ``<Fu - Fv, u - v> >= -mu ||u - v||^2`` with slack ``tol*(1+||u-v||^2)``.

    ``worst_ratio`` is the largest observed ``-<Fu-Fv, u-v> / ||u-v||^2``,
    the smallest mu the sample supports.
    """
    oracle = _oracle(opF)
    _require_l2(oracle, "check_hypomonotone")

    def margin(u, v, fu, fv):
        duv = u - v
        sq = np.einsum("ij,ij->i", duv, duv)
        inner = np.einsum("ij,ij->i", fu - fv, duv)
        valid = np.sqrt(sq) >= NEAR_ZERO
        ratio = -inner / np.where(valid, sq, 1.0)
        return ratio, -mu * sq - inner - tol * (1.0 + sq), valid

    tested, skipped, worst, witness = _sweep(oracle, sampler, n_pairs, margin)
    return CheckReport("hypomonotone", witness is None, tested, worst, witness, tol,
                       _seed_of(sampler), skipped, params={"mu": mu, "norm": "l2"})


def check_gradual_resolvent_condition(opF, D, alpha, sampler, n_pairs=100_000, tol=REL_SLACK):
    """Test ``<Fu-Fv, u-v> >= -(t/(1+t)) ||u-v||^2`` with ``t = (alpha/D) max(||Fu||, ||Fv||)``.

    ``worst_ratio`` is the largest observed ``-<Fu-Fv, u-v> / ||u-v||^2``
    divided by the pair's ``t/(1+t)``.
    """
    oracle = _oracle(opF)
    _require_l2(oracle, "check_gradual_resolvent_condition")

    def margin(u, v, fu, fv):
        duv = u - v
        sq = np.einsum("ij,ij->i", duv, duv)
        inner = np.einsum("ij,ij->i", fu - fv, duv)
        t = alpha / D * np.maximum(_rownorm(fu, NormKind.L2), _rownorm(fv, NormKind.L2))
        w = t / (1.0 + t)
        valid = np.sqrt(sq) >= NEAR_ZERO
        with np.errstate(divide="ignore", invalid="ignore"):
            need = -inner / np.where(valid, sq, 1.0)
            ratio = np.where(w > 0, need / np.where(w > 0, w, 1.0),
                             np.where(need > 0, np.inf, 0.0))
        return ratio, -w * sq - inner - tol * (1.0 + sq), valid

    tested, skipped, worst, witness = _sweep(oracle, sampler, n_pairs, margin)
    return CheckReport("gradual_resolvent", witness is None, tested, worst, witness, tol,
                       _seed_of(sampler), skipped,
                       params={"D": D, "alpha": alpha, "norm": "l2"})


def check_increment_contraction(trace, lam, beta_prime=1.0, tol=0.0):
    """Test ``s_{k+1} <= (1 - beta_prime*lam) s_k`` along a fixed-step trace.

    ``s_k`` is the recorded step ``||x_k - x_{k-1}||``; comparisons start at
    the second step of each unbroken run of records within one phase, so
    the trace must be recorded with ``trace_every=1``. Fewer than three
    iterates gives an inconclusive (passing) report. The witness is the
    pair of record indices ``(k, k+1)`` of the first failing comparison.
    """
    records = list(trace)
    factor = 1.0 - beta_prime * lam
    if len(records) < 3:
        return CheckReport("increment_contraction", True, 0, 0.0, None, tol,
                           inconclusive=True, params={"lam": lam, "beta_prime": beta_prime})
    tested = 0
    worst = 0.0
    witness = None
    prev = None
    for i, rec in enumerate(records):
        if rec.step is None or (prev is not None and records[prev].phase != rec.phase):
            prev = i if rec.step is not None else None
            continue
        if prev is not None and records[prev].global_iter == rec.global_iter - 1:
            s_prev, s = records[prev].step, rec.step
            tested += 1
            bound = factor * s_prev
            if bound > 0:
                worst = max(worst, s / bound)
            elif s > 0:
                worst = math.inf
            if witness is None and s > bound * (1.0 + tol):
                witness = (prev, i)
        prev = i
    return CheckReport("increment_contraction", witness is None, tested, worst, witness, tol,
                       inconclusive=tested == 0, params={"lam": lam, "beta_prime": beta_prime})


def reproduce(report, op, trace=None):
    """Re-test ``report``'s witness; True when the violation recurs.

    ``op`` is the operator the report was produced on (F for the
    F-condition and inner-product checks). For increment-contraction reports
    pass the trace instead.
    """
    if report.witness is None:
        return False
    p = report.params
    if report.name == "increment_contraction":
        a, b = report.witness
        s_prev, s = trace[a].step, trace[b].step
        return s > (1.0 - p["beta_prime"] * p["lam"]) * s_prev * (1.0 + report.tolerance)
    oracle = _oracle(op)
    x, y = (np.asarray(w, dtype=np.float64)[None, :] for w in report.witness)
    tx, ty = oracle.evaluate(x[0])[None, :], oracle.evaluate(y[0])[None, :]
    kind = oracle.norm
    if report.name == "lipschitz":
        limit = p["gamma"] * (1.0 + report.tolerance)
        return bool(_rownorm(tx - ty, kind)[0] > limit * _rownorm(x - y, kind)[0])
    if report.name == "gradually_expansive":
        _, lhs, rhs = _gradual_parts(x, y, tx, ty, kind, p["D"], p["alpha"])
        return bool(lhs[0] - rhs[0] > report.tolerance)
    if report.name == "F_condition":
        lhs = _rownorm(tx - ty, kind)[0]
        rhs = p["alpha"] / p["D"] * max(_rownorm(tx, kind)[0], _rownorm(ty, kind)[0]) \
            * _rownorm(x - y, kind)[0]
        return bool(lhs - rhs > report.tolerance)
    d = (x - y)[0]
    sq = float(d @ d)
    inner = float((tx - ty)[0] @ d)
    if report.name == "hypomonotone":
        w = p["mu"]
    elif report.name == "gradual_resolvent":
        t = p["alpha"] / p["D"] * max(np.linalg.norm(tx), np.linalg.norm(ty))
        w = t / (1.0 + t)
    else:
        raise ValueError(f"unknown report kind {report.name!r}")
    return bool(-w * sq - inner > report.tolerance * (1.0 + sq))


@dataclass(frozen=True)
class BoundInputs:
    """Inputs shared by the bound evaluators; absent fields are None."""

    eps0: float
    eps: float
    gamma: float = 1.0
    D_star: float = None
    D: float = None
    beta: float = None
    beta_prime: float = None
    mu: float = None

    def __post_init__(self):
        for name in ("eps0", "eps", "gamma", "D_star", "D", "mu"):
            v = getattr(self, name)
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        for name in ("beta", "beta_prime"):
            v = getattr(self, name)
            if v is not None and not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")


@dataclass(frozen=True)
class BoundResult:
    lam: float
    k: int
    error_level: float = None
    saturated: bool = False


def _inputs(inp, kw):
    if inp is None:
        return BoundInputs(**kw)
    if kw:
        raise TypeError("pass either BoundInputs or keyword arguments, not both")
    return inp


def _need(inp, *names):
    missing = [n for n in names if getattr(inp, n) is None]
    if missing:
        raise ValueError(f"missing bound inputs: {', '.join(missing)}")


def _ceil_ratio(num, den):
    """``ceil(num/den)`` with the k = 0 floor and saturation flag."""
    if num <= 0:
        return 0, False
    if not den > 0:
        return K_MAX, True
    q = num / den
    if not math.isfinite(q) or q >= K_MAX:
        return K_MAX, True
    return math.ceil(q), False


def bound_fixed_step(inp=None, **kw):
    """Step size and query count for a fixed-step run on a gamma <= 1 operator.

    lam = eps/(4 D* + eps) and
    k = ceil(ln(2 eps0/eps) / (ln(1/(1-lam)) + ln(1/gamma))).
    """
    inp = _inputs(inp, kw)
    _need(inp, "D_star")
    if inp.gamma > 1:
        raise GammaOutOfRange(f"needs gamma <= 1, got {inp.gamma}")
    lam = inp.eps / (4.0 * inp.D_star + inp.eps)
    den = -math.log1p(-lam) - math.log(inp.gamma)
    k, sat = _ceil_ratio(math.log(2.0 * inp.eps0 / inp.eps), den)
    return BoundResult(lam, k, saturated=sat)


def bound_mild(inp=None, **kw):
    """Step size and query count for a fixed-step run on a mildly expansive operator.

    lam = (beta eps/D)/(1 + beta eps/D) and
    k = ceil(ln(eps0/((1-beta) eps)) / -ln((1-lam) gamma)).

    Raises:
        GammaOutOfRange: gamma >= 1 + beta*eps/D.
    """
    inp = _inputs(inp, kw)
    _need(inp, "D", "beta")
    a = inp.beta * inp.eps / inp.D
    if inp.gamma >= 1.0 + a:
        raise GammaOutOfRange(f"gamma={inp.gamma} must be below 1 + beta*eps/D = {1.0 + a}")
    lam = a / (1.0 + a)
    den = -(math.log1p(-lam) + math.log(inp.gamma))
    k, sat = _ceil_ratio(math.log(inp.eps0 / ((1.0 - inp.beta) * inp.eps)), den)
    return BoundResult(lam, k, saturated=sat)


def bound_corollary_mild(inp=None, **kw):
    """Error level reachable on a gamma > 1 operator with lam = 1 - beta/gamma.

    Returns k = ceil(ln(eps0/eps)/ln(1/beta)) and
    error_level = (gamma/beta - 1) D + eps. Without ``beta`` the choice
    beta = 1 - eps/(2 gamma D) is used; the count is then taken at target
    eps/2 and the error level is (gamma - 1) D + eps.
    """
    inp = _inputs(inp, kw)
    _need(inp, "D")
    g = inp.gamma
    if g <= 1:
        raise GammaOutOfRange(f"needs gamma > 1, got {g}")
    if inp.beta is None:
        beta = 1.0 - inp.eps / (2.0 * g * inp.D)
        target = inp.eps / 2.0
        error = (g - 1.0) * inp.D + inp.eps
    else:
        beta = inp.beta
        target = inp.eps
        error = (g / beta - 1.0) * inp.D + inp.eps
    lam = 1.0 - beta / g
    k, sat = _ceil_ratio(math.log(inp.eps0 / target), -math.log(beta))
    return BoundResult(lam, k, error, sat)


def bound_leb(beta, mu):
    """Largest admissible step and per-restart query count under an error bound.

    lam_max = (mu beta/4)/(1 + mu beta/4) and
    k = ceil(ln(2/beta)/ln(1/(1 - lam_max))).
    """
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    a = mu * beta / 4.0
    lam = a / (1.0 + a)
    k, sat = _ceil_ratio(math.log(2.0 / beta), -math.log1p(-lam))
    return BoundResult(lam, k, saturated=sat)


def bound_ghal_expansive_error(D, gamma, beta, beta_prime):
    """Residual level (D/beta^2)(gamma-1)/(1-beta_prime) reached by GHAL when gamma > 1.

    ``beta`` may equal 1 and ``beta_prime`` may equal 0 (boundary cases).
    """
    if gamma <= 1:
        raise GammaOutOfRange(f"needs gamma > 1, got {gamma}")
    if not D > 0:
        raise ValueError("D must be positive")
    if not 0 < beta <= 1 or not 0 <= beta_prime < 1:
        raise ValueError("need 0 < beta <= 1 and 0 <= beta_prime < 1")
    return D / beta ** 2 * (gamma - 1.0) / (1.0 - beta_prime)


BOUNDS = {
    "fixed-step": bound_fixed_step,
    "mild": bound_mild,
    "corollary-mild": bound_corollary_mild,
}
