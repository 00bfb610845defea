"""Fixed-point iterations with exact oracle-query accounting.

Every solver evaluates the operator exactly once per iterate and reuses
that cached value for the residual test, any safeguard and the next update.
All solvers share the signature ``solver(op, x0, cfg, callback=None)``
(``fixhal`` additionally takes the step size) and return a
:class:`RunResult`. ``callback(x, tx)`` is invoked after every oracle query
with the queried point and its image.
"""
import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import NonFiniteError, as_vector, combine

logger = logging.getLogger(__name__)


class Termination(str, enum.Enum):
    TARGET_REACHED = "target_reached"
    SAFEGUARD_HALT = "safeguard_halt"
    BUDGET_EXHAUSTED = "budget_exhausted"
    NON_FINITE = "non_finite"


class HaltMode(str, enum.Enum):
    HALT = "halt"
    BREAK_REVERT = "break_revert"


class ContractionFailure(RuntimeError):
    """The resolvent's inner map failed to contract."""


@dataclass
class SolverConfig:
    """Parameters shared by all solvers.

    ``lam`` is the fixed step of ``fixhal`` (and the per-phase step of
    ``fixhal_restarted`` when given). ``D`` is the diameter bound GHAL needs.
    ``mu`` is an error-bound constant for ``fixhal_restarted``.
    """

    target_eps: float = 1e-6
    max_queries: int = 10_000
    beta: float = 0.975
    beta_prime: float = 1 / 1.01
    lam: float = None
    D: float = None
    mu: float = None
    halt_mode: HaltMode = HaltMode.HALT
    trace_every: int = 1

    def __post_init__(self):
        self.halt_mode = HaltMode(self.halt_mode)
        if not self.target_eps > 0:
            raise ValueError("target_eps must be positive")
        if int(self.max_queries) != self.max_queries or self.max_queries < 1:
            raise ValueError("max_queries must be a positive integer")
        self.max_queries = int(self.max_queries)
        for name in ("beta", "beta_prime"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.lam is not None and not 0 < self.lam < 1:
            raise ValueError(f"lam must lie in (0, 1), got {self.lam}")
        if self.D is not None and not self.D > 0:
            raise ValueError("D must be positive")
        if self.mu is not None and not self.mu > 0:
            raise ValueError("mu must be positive")
        if int(self.trace_every) != self.trace_every or self.trace_every < 1:
            raise ValueError("trace_every must be a positive integer")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class TraceRecord:
    """One evaluated iterate.

    ``step`` is the distance from the previous iterate of the same update
    sequence (None at sequence starts); it is kept in memory for the
    increment-contraction checks and is not part of the exported columns.
    """

    global_iter: int
    queries: int
    residual: float
    lam: float = None
    eps_k: float = None
    D_estimate: float = None
    phase: int = 0
    step: float = None


class IterationTrace:
    """Ordered trace records; ``queries`` is strictly increasing."""

    def __init__(self, records=None):
        self.records = list(records or [])

    def append(self, record):
        if self.records and record.queries <= self.records[-1].queries:
            raise ValueError("trace queries must be strictly increasing")
        self.records.append(record)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=object if name in (
            "lam", "eps_k", "D_estimate", "step") else None)

    def values(self, name):
        """Column as a float array with NaN for absent values."""
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name)
                         for r in self.records], dtype=np.float64)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]


@dataclass
class RunResult:
    algorithm: str
    final_point: np.ndarray
    final_residual: float
    total_queries: int
    termination: Termination
    trace: IterationTrace
    safeguard_events: int = 0
    message: str = ""
    extras: dict = field(default_factory=dict)


class _BudgetExhausted(Exception):
    pass


class _NonFinite(Exception):
    pass


class _Run:
    """Bookkeeping shared by the solvers: budget, trace, best point."""

    def __init__(self, algorithm, op, cfg, callback=None):
        self.algorithm = algorithm
        self.op = op
        self.cfg = cfg
        self.callback = callback
        self.start = op.queries
        self.trace = IterationTrace()
        self.best = None
        self.index = -1
        self.pending = None
        self.safeguard_events = 0

    @property
    def used(self):
        return self.op.queries - self.start

    def query(self, x):
        if self.used >= self.cfg.max_queries:
            raise _BudgetExhausted
        if not np.all(np.isfinite(x)):
            raise _NonFinite("iterate has non-finite coordinates")
        tx = self.op.evaluate(x)
        if not np.all(np.isfinite(tx)):
            raise _NonFinite("operator returned non-finite values")
        r = self.op.residual(x, tx)
        self.index += 1
        if self.best is None or r < self.best[0]:
            self.best = (r, x, tx)
        if self.callback is not None:
            self.callback(x, tx)
        return tx, r

    def record(self, residual, lam=None, eps_k=None, D=None, phase=0, step=None, force=False):
        rec = TraceRecord(self.index, self.used, residual, lam, eps_k, D, phase, step)
        if force or self.index % self.cfg.trace_every == 0:
            self.trace.append(rec)
            self.pending = None
        else:
            self.pending = rec

    def finish(self, termination, x=None, r=None, message=""):
        if self.pending is not None:
            self.trace.append(self.pending)
            self.pending = None
        if x is None:
            if self.best is None:
                raise RuntimeError("no iterate was evaluated")
            r, x, _ = self.best
        return RunResult(self.algorithm, np.array(x, copy=True), float(r), self.used,
                         Termination(termination), self.trace, self.safeguard_events, message)


def _execute(run, body):
    try:
        return body()
    except _BudgetExhausted:
        return run.finish(Termination.BUDGET_EXHAUSTED, message="query budget exhausted")
    except _NonFinite as exc:
        logger.warning("%s aborted: %s after %d queries", run.algorithm, exc, run.used)
        if run.best is None:
            raise NonFiniteError(str(exc)) from None
        return run.finish(Termination.NON_FINITE, message=str(exc))


def picard(op, x0, cfg, callback=None):
    """Picard iteration x_{k+1} = T(x_k)."""
    run = _Run("picard", op, cfg, callback)
    x = as_vector(x0, op.dim)

    def body():
        nonlocal x
        tx, r = run.query(x)
        run.record(r, force=True)
        while r > cfg.target_eps:
            step = r
            x = tx
            tx, r = run.query(x)
            run.record(r, step=step)
        return run.finish(Termination.TARGET_REACHED, x, r)

    return _execute(run, body)


def halpern_classic(op, x0, cfg, callback=None):
    """Halpern iteration anchored at x0 with weights 1/(k+2).

    The weight on x0 when forming x_{k+1} from x_k is 1/(k+2), so that for
    T = 0 and x0 = 1 the iterates are x_k = 1/(k+1).
    """
    run = _Run("halpern", op, cfg, callback)
    x0 = as_vector(x0, op.dim)

    def body():
        x = x0
        tx, r = run.query(x)
        run.record(r, force=True)
        k = 0
        while r > cfg.target_eps:
            lam = 1.0 / (k + 2)
            x_new = combine(x0, tx, lam)
            step = op.distance(x_new, x)
            x = x_new
            tx, r = run.query(x)
            k += 1
            run.record(r, lam=lam, step=step)
        return run.finish(Termination.TARGET_REACHED, x, r)

    return _execute(run, body)


def fixhal(op, x0, lam, cfg, callback=None):
    """Fixed-step Halpern iteration x_{k+1} = lam*x0 + (1-lam)*T(x_k)."""
    if not 0 < lam < 1:
        raise ValueError(f"lam must lie in (0, 1), got {lam}")
    run = _Run("fixhal", op, cfg, callback)
    x0 = as_vector(x0, op.dim)

    def body():
        x = x0
        tx, r = run.query(x)
        run.record(r, lam=lam, force=True)
        while r > cfg.target_eps:
            x_new = combine(x0, tx, lam)
            step = op.distance(x_new, x)
            x = x_new
            tx, r = run.query(x)
            run.record(r, lam=lam, step=step)
        return run.finish(Termination.TARGET_REACHED, x, r)

    return _execute(run, body)


def fixhal_restarted(op, x0, cfg, callback=None):
    """Fixed-step Halpern restarted whenever the residual halves.

    Step size per phase: ``cfg.lam`` if given; otherwise, with ``cfg.mu``,
    the error-bound rule (mu/8)/(1 + mu/8); otherwise
    eps_p/(4*D + eps_p) with eps_p half the phase-start residual and D a
    running estimate of the distance to a fixed point. D starts at the
    initial residual and doubles whenever the next candidate iterate would
    move farther than D from the phase anchor.
    """
    run = _Run("restarted", op, cfg, callback)
    x0 = as_vector(x0, op.dim)
    adaptive = cfg.lam is None and cfg.mu is None

    def step_size(r_start, D):
        if cfg.lam is not None:
            return cfg.lam
        if cfg.mu is not None:
            a = cfg.mu / 8.0
            return a / (1.0 + a)
        eps_p = 0.5 * r_start
        return eps_p / (4.0 * D + eps_p)

    def body():
        anchor = x = x0
        tx, r = run.query(x)
        r_start = r
        D = r
        phase = 0
        lam = step_size(r_start, D) if r > 0 else None
        run.record(r, lam=lam, D=D if adaptive else None, phase=phase, force=True)
        while r > cfg.target_eps:
            if r <= 0.5 * r_start and x is not anchor:
                anchor, r_start, phase = x, r, phase + 1
                lam = step_size(r_start, D)
            x_new = combine(anchor, tx, lam)
            if adaptive:
                while op.distance(x_new, anchor) > D:
                    D *= 2.0
                    lam = step_size(r_start, D)
                    x_new = combine(anchor, tx, lam)
            step = op.distance(x_new, x)
            x = x_new
            tx, r = run.query(x)
            run.record(r, lam=lam, D=D if adaptive else None, phase=phase, step=step,
                       force=r <= 0.5 * r_start)
        return run.finish(Termination.TARGET_REACHED, x, r)

    return _execute(run, body)


def _argmin_point(a, b):
    """Pick the (x, tx, r) triple with the smaller residual; ties go to `b`."""
    return a if a[2] < b[2] else b


def ghal(op, x0, cfg, callback=None):
    """Gradual Halpern algorithm with the expansion safeguard.

    Requires ``cfg.D``. With ``cfg.halt_mode == HALT`` the run stops at the
    first safeguard trigger and returns the better of the current inner
    iterate and the phase anchor. With ``BREAK_REVERT`` the inner loop is
    left, that better point becomes the next anchor, and the step size is
    frozen at the last value that completed a phase.
    """
    if cfg.D is None:
        raise ValueError("ghal requires D")
    run = _Run("ghal", op, cfg, callback)
    x0 = as_vector(x0, op.dim)
    beta, beta_p, D = cfg.beta, cfg.beta_prime, cfg.D

    def body():
        tx0, r0 = run.query(x0)
        hat = (x0, tx0, r0)
        eps_k = r0
        k = 0
        run.record(r0, eps_k=eps_k, D=D, phase=0, force=True)
        lam_accepted = None
        frozen = None
        while hat[2] > cfg.target_eps:
            k += 1
            eps_k = beta * eps_k
            a = beta * eps_k / D
            lam = a / (1.0 + a) if frozen is None else frozen
            y0, ty0, ry0 = hat
            y, ty, ry = hat
            prev_step = None
            j = 0
            tripped = False
            first = True
            while ry > eps_k:
                y_next = combine(y0, ty, lam)
                step = op.distance(y_next, y)
                if j >= 2 and step >= (1.0 - beta_p * lam) * prev_step:
                    run.safeguard_events += 1
                    best = _argmin_point((y, ty, ry), (y0, ty0, ry0))
                    if cfg.halt_mode is HaltMode.HALT:
                        return run.finish(Termination.SAFEGUARD_HALT, best[0], best[2],
                                          message=f"safeguard fired in phase {k} at inner step {j}")
                    hat = best
                    frozen = lam_accepted if lam_accepted is not None else lam
                    tripped = True
                    break
                ty_next, ry_next = run.query(y_next)
                y, ty, ry = y_next, ty_next, ry_next
                prev_step = step
                j += 1
                run.record(ry, lam=lam, eps_k=eps_k, D=D, phase=k, step=step, force=first)
                first = False
            if not tripped:
                hat = (y, ty, ry)
                lam_accepted = lam
        return run.finish(Termination.TARGET_REACHED, hat[0], hat[2])

    return _execute(run, body)


def adaghal(op, x0, cfg, callback=None):
    """Adaptive gradual Halpern algorithm (no diameter bound needed).

    The displacement guard tests the current inner iterate y_j against the
    phase anchor. When it fires, D doubles, the step size is recomputed, and
    the iterate is reset to the better of y_{j+1} and the anchor; evaluating
    y_{j+1} for that comparison is one counted query.
    """
    run = _Run("adaghal", op, cfg, callback)
    x0 = as_vector(x0, op.dim)

    def body():
        tx0, r0 = run.query(x0)
        hat = (x0, tx0, r0)
        eps_k = r0
        D = r0
        k = 0
        run.record(r0, eps_k=eps_k, D=D, phase=0, force=True)
        while hat[2] > cfg.target_eps:
            k += 1
            eps_k = eps_k / 2.0
            lam = (eps_k / (2.0 * D)) / (1.0 + eps_k / (2.0 * D))
            y0, ty0, ry0 = hat
            y, ty, ry = hat
            first = True
            while ry > eps_k:
                y_next = combine(y0, ty, lam)
                step = op.distance(y_next, y)
                if op.distance(y, y0) <= D:
                    ty_next, ry_next = run.query(y_next)
                    y, ty, ry = y_next, ty_next, ry_next
                    run.record(ry, lam=lam, eps_k=eps_k, D=D, phase=k, step=step, force=first)
                else:
                    D *= 2.0
                    lam = (eps_k / (2.0 * D)) / (1.0 + eps_k / (2.0 * D))
                    ty_next, ry_next = run.query(y_next)
                    y, ty, ry = _argmin_point((y_next, ty_next, ry_next), (y0, ty0, ry0))
                    # the reset breaks the update sequence, so no step is recorded
                    run.record(ry_next, lam=lam, eps_k=eps_k, D=D, phase=k, force=True)
                first = False
            hat = (y, ty, ry)
        return run.finish(Termination.TARGET_REACHED, hat[0], hat[2])

    return _execute(run, body)


SOLVERS = {
    "picard": picard,
    "halpern": halpern_classic,
    "restarted": fixhal_restarted,
    "ghal": ghal,
    "adaghal": adaghal,
}


def run_solver(name, op, x0, cfg, callback=None):
    """Dispatch by name; ``fixhal`` takes its step size from ``cfg.lam``."""
    if name == "fixhal":
        if cfg.lam is None:
            raise ValueError("fixhal requires lam")
        return fixhal(op, x0, cfg.lam, cfg, callback)
    try:
        solver = SOLVERS[name]
    except KeyError:
        raise KeyError(f"unknown solver {name!r}") from None
    return solver(op, x0, cfg, callback)


def resolvent(op, x, tau, tol=1e-12, budget=10**6, gamma=None):
    """Approximate R_tau(x), the fixed point of y -> x/(1+tau) + tau/(1+tau) T(y).

    Picard-iterates that map from y = x. With contraction factor
    q = tau*gamma/(1+tau) (gamma defaults to the operator's declared Lipschitz constant,
    else 1), stops once a step is at most tol*(1-q)/q, which bounds the
    distance of the returned point to the true resolvent by tol.

    Raises:
        ContractionFailure: q >= 1, a step fails to shrink, or the budget
            of inner steps runs out.
        NonFiniteError: an iterate overflows.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    x = as_vector(x, op.dim)
    if gamma is None:
        gamma = op.spec.lipschitz if op.spec.lipschitz is not None else 1.0
    q = tau * gamma / (1.0 + tau)
    if q >= 1.0:
        raise ContractionFailure(f"contraction factor {q:.6g} >= 1 for tau={tau}, gamma={gamma}")
    threshold = tol * (1.0 - q) / max(q, np.finfo(float).tiny)
    anchor = 1.0 / (1.0 + tau)
    y = x
    prev = math.inf
    for j in range(budget):
        ty = op.evaluate(y)
        if not np.all(np.isfinite(ty)):
            raise NonFiniteError("operator returned non-finite values inside the resolvent")
        if j == 0 and np.array_equal(ty, y):
            return y.copy()
        y_next = combine(x, ty, anchor)
        step = op.distance(y_next, y)
        if step <= threshold:
            return y_next
        if step >= prev:
            raise ContractionFailure(
                f"step {step:.3e} did not shrink (previous {prev:.3e}) at inner iteration {j}")
        prev = step
        y = y_next
    raise ContractionFailure(f"no convergence within {budget} inner steps")
