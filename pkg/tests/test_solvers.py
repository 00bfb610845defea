import math

import numpy as np
import pytest

from fplab import operators as ops
from fplab.core import CountedOperator, NonFiniteError
from fplab.solvers import (ContractionFailure, HaltMode, SolverConfig, Termination, adaghal,
                           fixhal, fixhal_restarted, ghal, halpern_classic, picard, resolvent,
                           run_solver)


def counted(spec):
    return CountedOperator(spec)


def collect():
    pts = []
    return pts, lambda x, tx: pts.append((x.copy(), tx.copy()))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(target_eps=0)
    with pytest.raises(ValueError):
        SolverConfig(beta=1.0)
    with pytest.raises(ValueError):
        SolverConfig(max_queries=0)
    with pytest.raises(ValueError):
        SolverConfig(lam=1.5)
    assert SolverConfig(halt_mode="break_revert").halt_mode is HaltMode.BREAK_REVERT


def test_picard_geometric_decay():
    op = counted(ops.make_linear_scale(0.5))
    res = picard(op, [1.0], SolverConfig(target_eps=1e-3))
    assert res.termination is Termination.TARGET_REACHED
    assert res.total_queries == 10 == op.queries
    assert res.final_residual == pytest.approx(0.5 ** 10)
    for k, rec in enumerate(res.trace):
        assert rec.residual == pytest.approx(0.5 ** (k + 1), rel=1e-15)


def test_identity_one_query_everywhere():
    for name in ("picard", "halpern", "restarted", "adaghal"):
        res = run_solver(name, counted(ops.make_identity(3)), [1.0, 2.0, 3.0], SolverConfig())
        assert res.termination is Termination.TARGET_REACHED and res.total_queries == 1
    res = ghal(counted(ops.make_identity(3)), [1, 2, 3], SolverConfig(D=1.0))
    assert res.total_queries == 1 and res.final_residual == 0


def test_picard_rotation_stagnates():
    spec = ops.make_rotation_hard(500, 1.0)
    res = picard(counted(spec), np.zeros(500), SolverConfig(target_eps=1e-8, max_queries=10_000))
    assert res.termination is Termination.BUDGET_EXHAUSTED
    assert res.final_residual > 0.1 * res.trace[0].residual


def test_halpern_zero_operator_iterates():
    pts, cb = collect()
    res = halpern_classic(counted(ops.make_linear_scale(0.0)), [1.0],
                          SolverConfig(target_eps=1e-2, max_queries=1000), callback=cb)
    for k, (x, _) in enumerate(pts):
        assert x[0] == pytest.approx(1 / (k + 1), rel=1e-14)
    assert res.trace[5].residual == pytest.approx(1 / 6, rel=1e-14)


def test_halpern_identity_stays_put():
    res = halpern_classic(counted(ops.make_identity(2)), [3.0, -1.0], SolverConfig())
    np.testing.assert_array_equal(res.final_point, [3.0, -1.0])


def test_fixhal_first_iterates_and_limit():
    pts, cb = collect()
    op = counted(ops.make_linear_scale(0.5))
    fixhal(op, [1.0], 0.5, SolverConfig(target_eps=1e-14, max_queries=3), callback=cb)
    assert [p[0][0] for p in pts] == [1.0, 0.75, 0.6875]
    res = fixhal(counted(ops.make_linear_scale(0.5)), [1.0], 0.5,
                 SolverConfig(target_eps=1e-14, max_queries=200))
    assert abs(res.final_point[0] - 2 / 3) <= 1e-12


def test_fixhal_rejects_bad_step():
    with pytest.raises(ValueError):
        fixhal(counted(ops.make_identity(1)), [0.0], 1.0, SolverConfig())


def test_query_accounting_matches_counter():
    spec = ops.make_rotation_hard(30, 1.0)
    for name in ("picard", "halpern", "restarted", "adaghal"):
        op = counted(spec)
        res = run_solver(name, op, np.zeros(30), SolverConfig(target_eps=1e-3, max_queries=4000))
        assert res.total_queries == op.queries == res.trace[-1].queries
    op = counted(spec)
    res = ghal(op, np.zeros(30), SolverConfig(target_eps=1e-3, max_queries=4000, D=2.0))
    assert res.total_queries == op.queries


def test_budget_returns_best_point():
    spec = ops.make_rotation_hard(50, 1.0)
    op = counted(spec)
    pts, cb = collect()
    res = fixhal(op, np.zeros(50), 0.001, SolverConfig(target_eps=1e-9, max_queries=37), callback=cb)
    assert res.termination is Termination.BUDGET_EXHAUSTED
    assert op.queries == 37
    best = min(range(len(pts)), key=lambda i: np.linalg.norm(pts[i][1] - pts[i][0]))
    np.testing.assert_array_equal(res.final_point, pts[best][0])
    assert res.final_residual == min(r.residual for r in res.trace)


def test_non_finite_aborts():
    spec = ops.make_linear_scale(1e100)
    res = picard(counted(spec), [1e100], SolverConfig(max_queries=100))
    assert res.termination is Termination.NON_FINITE
    assert np.all(np.isfinite(res.final_point))
    assert "non-finite" in res.message


def test_non_finite_at_start_raises():
    spec = ops.make_linear_scale(1e308)
    with pytest.raises(NonFiniteError):
        picard(counted(spec), [1e10], SolverConfig())


def test_trace_subsampling_keeps_ends_and_boundaries():
    spec = ops.make_linear_scale(0.5)
    res = fixhal_restarted(counted(spec), [1.0], SolverConfig(target_eps=1e-6, lam=0.25,
                                                                trace_every=7))
    q = [r.queries for r in res.trace]
    assert q[0] == 1 and q[-1] == res.total_queries
    assert all(a < b for a, b in zip(q, q[1:]))
    full = fixhal_restarted(counted(spec), [1.0], SolverConfig(target_eps=1e-6, lam=0.25))
    assert {r.phase for r in res.trace} == {r.phase for r in full.trace}


def test_restarted_phases_halve():
    res = fixhal_restarted(counted(ops.make_linear_scale(0.5)), [1.0],
                           SolverConfig(target_eps=1e-6, lam=0.25))
    assert res.termination is Termination.TARGET_REACHED
    starts = {}
    for rec in res.trace:
        starts.setdefault(rec.phase, rec)
    phases = sorted(starts)
    assert len(phases) > 2
    for p, q in zip(phases, phases[1:]):
        end_of_p = [r for r in res.trace if r.phase == p][-1]
        first = [r for r in res.trace if r.phase == p][0].residual
        prev_end = [r for r in res.trace if r.phase == p - 1]
        start_res = prev_end[-1].residual if prev_end else first
        assert end_of_p.residual <= 0.5 * start_res


def test_restarted_step_rules():
    spec = ops.make_rotation_hard(50, 5 / 6)
    for cfg in (SolverConfig(target_eps=1e-8, mu=0.5), SolverConfig(target_eps=1e-8)):
        res = fixhal_restarted(counted(spec), np.zeros(50), cfg)
        assert res.termination is Termination.TARGET_REACHED
    res = fixhal_restarted(counted(spec), np.zeros(50), SolverConfig(target_eps=1e-8, mu=0.5))
    lam = {r.lam for r in res.trace}
    assert lam == {(0.5 / 8) / (1 + 0.5 / 8)}


def test_ghal_requires_D():
    with pytest.raises(ValueError, match="ghal requires D"):
        ghal(counted(ops.make_identity(1)), [0.0], SolverConfig())


def test_ghal_eps_schedule_and_phase_exit():
    spec = ops.make_rotation_hard(40, 1.0)
    x0 = np.zeros(40)
    D = 2 * np.linalg.norm(spec.fixed_point() - x0)
    cfg = SolverConfig(target_eps=1e-3, max_queries=50_000, D=D)
    res = ghal(counted(spec), x0, cfg)
    assert res.termination is Termination.TARGET_REACHED and res.safeguard_events == 0
    eps_by_phase = {}
    last = {}
    for rec in res.trace:
        eps_by_phase.setdefault(rec.phase, rec.eps_k)
        last[rec.phase] = rec
    phases = sorted(eps_by_phase)
    # eps_k runs k = 1, 2, ... including phases that needed no iterations
    eps0 = res.trace[0].eps_k
    for k in phases[1:]:
        expected = eps0
        for _ in range(k):
            expected = cfg.beta * expected
        assert eps_by_phase[k] == expected
        assert last[k].residual <= eps_by_phase[k]


def test_ghal_halt_on_expansive_picks_better_point():
    spec = ops.make_linear_scale(1.2)
    pts, cb = collect()
    res = ghal(counted(spec), [1.0], SolverConfig(target_eps=1e-6, D=4.0, max_queries=10_000),
               callback=cb)
    assert res.termination is Termination.SAFEGUARD_HALT
    assert res.safeguard_events == 1
    r0 = abs(pts[0][1][0] - pts[0][0][0])
    assert res.final_residual <= r0


def test_ghal_break_revert_continues():
    spec = ops.make_ball_rotation_scale(20, 1 + 1e-3, 0.5)
    cfg = SolverConfig(target_eps=1e-6, D=2.0, max_queries=20_000, halt_mode="break_revert")
    res = ghal(counted(spec), np.zeros(20), cfg)
    halt = ghal(counted(spec), np.zeros(20), cfg.with_(halt_mode="halt"))
    assert res.termination is not Termination.SAFEGUARD_HALT
    if halt.termination is Termination.SAFEGUARD_HALT:
        assert res.safeguard_events >= 1
        assert res.total_queries >= halt.total_queries


def test_adaghal_D_doubles_and_stays_bounded():
    spec = ops.make_rotation_hard(60, 1.0)
    x0 = np.zeros(60)
    res = adaghal(counted(spec), x0, SolverConfig(target_eps=1e-3, max_queries=100_000))
    assert res.termination is Termination.TARGET_REACHED
    Ds = [r.D_estimate for r in res.trace]
    for a, b in zip(Ds, Ds[1:]):
        assert b in (a, 2 * a)
    assert max(Ds) <= 4 * np.linalg.norm(x0 - spec.fixed_point()) + 1e-9


def test_adaghal_contractive_scalar():
    res = adaghal(counted(ops.make_linear_scale(0.5)), [1.0], SolverConfig(target_eps=1e-8))
    assert res.termination is Termination.TARGET_REACHED
    assert res.total_queries <= 20 * math.log(1e8) / math.log(2)


def test_adaghal_matches_picard_on_contraction():
    spec = ops.make_rotation_hard(500, 5 / 6)
    cfg = SolverConfig(target_eps=1e-8, max_queries=10_000)
    p = picard(counted(spec), np.zeros(500), cfg)
    a = adaghal(counted(spec), np.zeros(500), cfg)
    assert a.termination is Termination.TARGET_REACHED
    assert a.total_queries <= 10 * p.total_queries


def test_resolvent_examples():
    x = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(resolvent(counted(ops.make_linear_scale(0.0, 3)), x, 1.0), x / 2,
                               atol=1e-10)
    out = resolvent(counted(ops.make_identity(3)), x, 0.7)
    assert np.array_equal(out, x)
    np.testing.assert_allclose(resolvent(counted(ops.make_linear_scale(0.5, 3)), x, 1.0),
                               2 * x / 3, atol=1e-11)


def test_resolvent_fixed_point_relation():
    spec = ops.make_rotation_hard(10, 1.0)
    op = counted(spec)
    x = np.linspace(-1, 1, 10)
    tau = 2.0
    y = resolvent(op, x, tau, tol=1e-12)
    rhs = x / (1 + tau) + tau / (1 + tau) * spec.apply(y)
    assert np.linalg.norm(y - rhs) <= 1e-11


def test_resolvent_failures():
    with pytest.raises(ContractionFailure):
        resolvent(counted(ops.make_linear_scale(3.0)), [1.0], 1.0)
    with pytest.raises(ContractionFailure):
        # claimed constant lies, so steps grow
        resolvent(counted(ops.make_linear_scale(3.0)), [1.0], 1.0, gamma=0.5)
    with pytest.raises(ValueError):
        resolvent(counted(ops.make_identity(1)), [1.0], 0.0)
