"""Batch driver for the property checkers and bound validations."""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import operators as ops
from .. import verify
from ..core import CountedOperator, distance
from ..solvers import HaltMode, SolverConfig, Termination, fixhal, fixhal_restarted, ghal
from .export import atomic_write_text, write_jsonl
from .presets import resolve_seed

logger = logging.getLogger(__name__)


@dataclass
class ZooEntry:
    """An operator together with the Lipschitz constant it claims."""

    label: str
    spec: object
    gamma: float
    region: object


@dataclass
class SuiteOutcome:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(ok for _, ok, _ in self.checks)

    @property
    def exit_code(self):
        return 0 if self.passed else 1

    def add(self, name, ok, report=None):
        self.checks.append((name, bool(ok), report))


def default_zoo():
    box1, box2 = ops.Box(-1.0, 1.0), ops.Box(-2.0, 2.0)
    return [
        ZooEntry("linear_scale_0.7", ops.make_linear_scale(0.7, 3), 0.7, box1),
        ZooEntry("rotation_hard_1", ops.make_rotation_hard(10, 1.0), 1.0, box2),
        ZooEntry("rotation_hard_5/6", ops.make_rotation_hard(10, 5 / 6), 5 / 6, box2),
        ZooEntry("piecewise_scale", ops.make_piecewise_scale(1.01, 0.5, 1), 1.01, box1),
        ZooEntry("piecewise_scale_d4", ops.make_piecewise_scale(1.01, 0.5, 4), 1.01, box1),
        ZooEntry("piecewise_slope", ops.make_piecewise_slope(1.0, 0.5, 3), 1.0, box2),
        ZooEntry("piecewise_slope_odd", ops.make_piecewise_slope(0.5, 1.0, 3, odd=True), 1.0, box2),
        ZooEntry("ball_projection", ops.make_ball_projection(5), 1.0, ops.Ball(2.0)),
        ZooEntry("rotation_slope", ops.make_rotation_slope(10, 1.0, 0.5), 1.0, box2),
        ZooEntry("ball_rotation_scale", ops.make_ball_rotation_scale(10, 1.001, 0.5), 1.001, box1),
    ]


def _lipschitz_checks(outcome, zoo, seed, n_pairs):
    if not zoo:
        logger.warning("empty operator list: Lipschitz certification is vacuous")
        outcome.add("lipschitz:<none>", True)
        return
    for entry in zoo:
        sampler = ops.DomainSampler(entry.region, entry.spec.dim, seed)
        rep = verify.estimate_lipschitz(entry.spec, sampler, n_pairs, gamma=entry.gamma)
        rep.params["operator"] = entry.label
        outcome.add(f"lipschitz:{entry.label}", rep.passed, rep)


def _gradual_checks(outcome, seed, n_pairs):
    for d in (1, 8):
        spec = ops.make_exp_shift(0.4, 2.0, d)
        sampler = ops.DomainSampler(ops.Box(-1.0, 1.0), d, seed)
        rep = verify.check_gradually_expansive(spec, 2.0, 0.4, sampler, n_pairs, 1e-10)
        outcome.add(f"gradual:exp_shift_d{d}", rep.passed, rep)

    spec = ops.make_linear_scale(1.5, 2)
    sampler = ops.DomainSampler(ops.Box(-1.0, 1.0), 2, seed)
    rep = verify.check_gradually_expansive(spec, 2.0 * math.sqrt(2.0), 0.4, sampler, n_pairs, 1e-10)
    ok = not rep.passed and verify.reproduce(rep, spec)
    outcome.add("negative_control:linear_scale_1.5", ok, rep)

    spec = ops.make_exp_shift(0.4, 2.0, 1)
    f_rep = verify.check_F_condition(ops.make_displacement(spec), 2.0, 0.4,
                                     ops.DomainSampler(ops.Box(-1.0, 1.0), 1, seed), n_pairs, 1e-10)
    t_rep = verify.check_gradually_expansive(spec, 2.0, 0.4,
                                             ops.DomainSampler(ops.Box(-1.0, 1.0), 1, seed),
                                             n_pairs, 1e-10)
    outcome.add("F_condition_implication:exp_shift", (not f_rep.passed) or t_rep.passed, f_rep)


def _bound_checks(outcome):
    # fixed step on a nonexpansive instance with known fixed point
    spec = ops.make_rotation_hard(100, 1.0)
    x0 = np.zeros(100)
    op = CountedOperator(spec)
    eps = 1e-2
    eps0 = distance(spec.apply(x0), x0)
    d_star = distance(x0, spec.fixed_point())
    b = verify.bound_fixed_step(eps0=eps0, eps=eps, D_star=d_star, gamma=1.0)
    res = fixhal(op, x0, b.lam, SolverConfig(target_eps=eps, max_queries=b.k + 1))
    outcome.add("bound:fixed_step", res.termination is Termination.TARGET_REACHED, None)

    # mildly expansive scalar instance
    spec = ops.make_piecewise_scale(1.0 + 1e-3, 0.5, 1)
    x0 = np.array([0.3])
    eps, D, beta = 1e-2, 2.0, 0.5
    eps0 = distance(spec.apply(x0), x0)
    b = verify.bound_mild(eps0=eps0, eps=eps, gamma=spec.lipschitz, D=D, beta=beta)
    res = fixhal(CountedOperator(spec), x0, b.lam, SolverConfig(target_eps=eps, max_queries=b.k + 1))
    outcome.add("bound:mild", res.termination is Termination.TARGET_REACHED, None)

    # restarts under an error bound: each phase must halve within k iterations
    spec = ops.make_linear_scale(0.5, 1)
    b = verify.bound_leb(0.5, 0.5)
    res = fixhal_restarted(CountedOperator(spec), [1.0], SolverConfig(target_eps=1e-8, mu=0.5))
    phases = {}
    for rec in res.trace:
        phases.setdefault(rec.phase, []).append(rec.queries)
    longest = max(max(q) - min(q) for q in phases.values())
    outcome.add("bound:leb", res.termination is Termination.TARGET_REACHED and longest <= b.k, None)

    # GHAL never halts on nonexpansive instances
    spec = ops.make_rotation_hard(50, 1.0)
    x0 = np.zeros(50)
    D = 2.0 * distance(x0, spec.fixed_point())
    res = ghal(CountedOperator(spec), x0, SolverConfig(target_eps=1e-4, max_queries=200_000, D=D))
    outcome.add("ghal:no_halt_nonexpansive", res.termination is Termination.TARGET_REACHED
                and res.safeguard_events == 0, None)

    # safeguard silence on a gradually expansive operator
    spec = ops.make_exp_shift(0.4, 2.0, 8)
    eps = 1e-4
    res = ghal(CountedOperator(spec), np.zeros(8),
               SolverConfig(target_eps=eps, max_queries=10**7, D=2.0, halt_mode=HaltMode.HALT))
    outcome.add("ghal:safeguard_silent_exp_shift",
                res.termination is Termination.TARGET_REACHED and res.safeguard_events == 0
                and res.total_queries <= 100 * 2.0 / eps, None)


def verify_suite(out_dir, seed=None, n_pairs=100_000, operators=None):
    """Run the checker and bound suite, write reports and a summary.

    `operators` replaces the default operator zoo used for Lipschitz
    certification (an empty list makes that part vacuous). Returns a
    :class:`SuiteOutcome` whose ``exit_code`` is 0 iff every check passed.
    """
    seed = resolve_seed(seed)
    zoo = default_zoo() if operators is None else list(operators)
    outcome = SuiteOutcome()
    _lipschitz_checks(outcome, zoo, seed, n_pairs)
    _gradual_checks(outcome, seed, n_pairs)
    _bound_checks(outcome)

    out_dir = Path(out_dir)
    records = []
    lines = [f"# seed={seed} n_pairs={n_pairs}"]
    for name, ok, rep in outcome.checks:
        rec = {"check": name, "passed": ok}
        if rep is not None:
            rec["report"] = rep.to_record()
        records.append(rec)
        detail = f" worst_ratio={rep.worst_ratio:.6g}" if rep is not None else ""
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}{detail}")
    lines.append(f"overall: {'PASS' if outcome.passed else 'FAIL'}")
    write_jsonl(records, out_dir / "verify_reports.jsonl")
    atomic_write_text(out_dir / "verify_summary.txt", "\n".join(lines) + "\n")
    return outcome
