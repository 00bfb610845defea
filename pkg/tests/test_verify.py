import math

import mpmath as mp
import numpy as np
import pytest

from fplab import operators as ops
from fplab.core import CountedOperator
from fplab.solvers import IterationTrace, SolverConfig, TraceRecord, fixhal
from fplab.verify import (BoundInputs, GammaOutOfRange, bound_corollary_mild, bound_fixed_step,
                          bound_ghal_expansive_error, bound_leb, bound_mild,
                          check_F_condition, check_gradual_resolvent_condition,
                          check_gradually_expansive, check_hypomonotone,
                          check_increment_contraction, estimate_lipschitz, reproduce)

mp.mp.dps = 50


def sampler(lo, hi, d, seed=42):
    return ops.DomainSampler(ops.Box(lo, hi), d, seed)


# high-precision formula oracles ------------------------------------------------

def oracle_fixed_step(eps0, eps, d_star, gamma):
    eps0, eps, d_star, gamma = map(mp.mpf, (eps0, eps, d_star, gamma))
    lam = eps / (4 * d_star + eps)
    k = mp.ceil(mp.log(2 * eps0 / eps) / (mp.log(1 / (1 - lam)) + mp.log(1 / gamma)))
    return lam, int(k)


def oracle_mild(eps0, eps, gamma, D, beta):
    eps0, eps, gamma, D, beta = map(mp.mpf, (eps0, eps, gamma, D, beta))
    a = beta * eps / D
    lam = a / (1 + a)
    return lam, int(mp.ceil(mp.log(eps0 / ((1 - beta) * eps)) / -mp.log((1 - lam) * gamma)))


def oracle_leb(beta, mu):
    a = mp.mpf(mu) * mp.mpf(beta) / 4
    lam = a / (1 + a)
    return lam, int(mp.ceil(mp.log(2 / mp.mpf(beta)) / mp.log(1 / (1 - lam))))


# Lipschitz --------------------------------------------------------------------

def test_lipschitz_linear_and_identity():
    rep = estimate_lipschitz(ops.make_linear_scale(0.7, 3), sampler(-1, 1, 3), 5000)
    assert rep.worst_ratio == pytest.approx(0.7, abs=1e-12)
    rep = estimate_lipschitz(ops.make_identity(2), sampler(-1, 1, 2), 5000)
    assert rep.worst_ratio == pytest.approx(1.0, abs=1e-12)
    assert rep.seed == 42 and rep.samples_tested == 5000


def test_lipschitz_piecewise_scale_approaches_gamma():
    spec = ops.make_piecewise_scale(1.01, 0.5)
    small = estimate_lipschitz(spec, sampler(-1, 1, 1), 100).worst_ratio
    big = estimate_lipschitz(spec, sampler(-1, 1, 1), 20_000).worst_ratio
    assert small <= big <= 1.01 * (1 + 1e-9)
    assert big == pytest.approx(1.01, abs=1e-9)
    x, y = np.array([0.1]), np.array([0.3])
    ratio = abs(spec.apply(x) - spec.apply(y))[0] / 0.2
    assert ratio == pytest.approx(1.01, rel=1e-12)


def test_lipschitz_counts_queries_and_fails_with_witness():
    op = CountedOperator(ops.make_linear_scale(1.5, 2))
    rep = estimate_lipschitz(op, sampler(-1, 1, 2), 1000, gamma=1.0)
    assert op.queries == 2000
    assert not rep.passed and reproduce(rep, op.spec)


def test_near_coincident_pairs_skipped():
    class Same:
        seed = 0

        def pairs(self, n):
            x = np.zeros((n, 1))
            return x, x + 1e-14

    rep = estimate_lipschitz(ops.make_identity(1), Same(), 10)
    assert rep.skipped == 10 and rep.samples_tested == 0


# gradual expansion --------------------------------------------------------------

def test_gradual_identity_and_exp_shift():
    assert check_gradually_expansive(ops.make_identity(2), 1.0, 0.3, sampler(-1, 1, 2), 2000).passed
    rep = check_gradually_expansive(ops.make_exp_shift(0.4, 2.0), 2.0, 0.4, sampler(-1, 1, 1),
                                    20_000, 1e-10)
    assert rep.passed and rep.witness is None


def test_gradual_negative_control_witness_near_fixed_point():
    spec = ops.make_linear_scale(1.5, 2)
    rep = check_gradually_expansive(spec, 2 * math.sqrt(2), 0.4, sampler(-1, 1, 2), 20_000, 1e-10)
    assert not rep.passed
    assert reproduce(rep, spec)
    x, y = rep.witness
    assert max(np.linalg.norm(x), np.linalg.norm(y)) < 1.0
    again = check_gradually_expansive(spec, 2 * math.sqrt(2), 0.4, sampler(-1, 1, 2), 20_000, 1e-10)
    np.testing.assert_array_equal(again.witness[0], x)


# F condition ---------------------------------------------------------------------

def test_F_condition_examples():
    assert check_F_condition(ops.make_linear_scale(0.0, 2), 1.0, 0.5, sampler(-1, 1, 2), 2000).passed
    rep = check_F_condition(ops.make_identity(2), 2.0, 0.5, sampler(-1, 1, 2), 2000)
    assert not rep.passed and reproduce(rep, ops.make_identity(2))


def test_F_condition_implies_definition_on_same_pairs():
    a = np.array([3.0, -2.0])
    B = np.array([[0.01, 0.02], [-0.02, 0.01]])
    F = ops.make_affine(B, a)
    T = ops.make_affine(np.eye(2) + B, a)
    f_rep = check_F_condition(F, 2.0, 0.5, sampler(-1, 1, 2, 5), 5000)
    t_rep = check_gradually_expansive(T, 2.0, 0.5, sampler(-1, 1, 2, 5), 5000)
    assert f_rep.passed and t_rep.passed


# inner-product conditions --------------------------------------------------------

def test_hypomonotone_linear_cases():
    neg = ops.make_linear_scale(-0.3, 3)
    rep = check_hypomonotone(neg, 0.3, sampler(-1, 1, 3), 5000)
    assert rep.passed and rep.worst_ratio == pytest.approx(0.3, rel=1e-12)
    rep = check_hypomonotone(neg, 0.29, sampler(-1, 1, 3), 5000)
    assert not rep.passed and reproduce(rep, neg)
    assert check_hypomonotone(ops.make_identity(3), 0.0, sampler(-1, 1, 3), 5000).passed
    rot = ops.make_affine(np.array([[-0.1, -1.0], [1.0, -0.1]]))
    rep = check_hypomonotone(rot, 0.1, sampler(-1, 1, 2), 5000)
    assert rep.passed and rep.worst_ratio == pytest.approx(0.1, rel=1e-12)


def test_inner_product_checks_need_l2():
    spec = ops.make_identity(2, norm="linf")
    with pytest.raises(ValueError):
        check_hypomonotone(spec, 0.0, sampler(-1, 1, 2), 10)
    with pytest.raises(ValueError):
        check_gradual_resolvent_condition(spec, 1.0, 0.5, sampler(-1, 1, 2), 10)


def test_gradual_resolvent_trivial_cases():
    assert check_gradual_resolvent_condition(ops.make_linear_scale(0.0, 2), 1.0, 0.5,
                                             sampler(-1, 1, 2), 2000).passed
    assert check_gradual_resolvent_condition(ops.make_identity(2), 1.0, 0.01,
                                             sampler(-1, 1, 2), 2000).passed


def _brute_critical_c(alpha, D, lo, hi, n=300):
    """Largest c such that -c Id satisfies the condition on an n x n grid of [lo, hi]."""
    grid = np.linspace(lo, hi, n)
    best = math.inf
    for u in grid:
        for v in grid:
            if u == v:
                continue
            m = max(abs(u), abs(v))
            # -c (u-v)^2 >= -(t/(1+t)) (u-v)^2 with t = (alpha/D) c m, solved for c
            best = min(best, (m - D / alpha) / m)
    return best


def test_gradual_resolvent_transition_matches_brute_force():
    alpha, D = 0.5, 0.5
    c_star = _brute_critical_c(alpha, D, 2.0, 3.0)
    assert c_star == pytest.approx(0.5, abs=0.01)
    for c, expect in ((c_star - 0.03, True), (c_star + 0.03, False)):
        spec = ops.make_linear_scale(-c)
        rep = check_gradual_resolvent_condition(spec, D, alpha, sampler(2.0, 3.0, 1), 20_000)
        assert rep.passed is expect
        if not expect:
            assert reproduce(rep, spec)


# increment contraction -------------------------------------------------------------

def _fixhal_trace(spec, x0, lam, n):
    return fixhal(CountedOperator(spec), x0, lam, SolverConfig(target_eps=1e-300, max_queries=n)).trace


def test_increment_contraction_examples():
    tr = _fixhal_trace(ops.make_linear_scale(0.5), [1.0], 0.3, 30)
    assert check_increment_contraction(tr, 0.3, 1.0).passed
    # steps of a run that has settled after its first move
    tr = IterationTrace([TraceRecord(k, k + 1, 0.0, 0.1, step=None if k == 0 else s)
                         for k, s in enumerate([None, 0.5, 0.0, 0.0, 0.0])])
    rep = check_increment_contraction(tr, 0.1, 0.5)
    assert rep.passed and not rep.inconclusive
    tr = _fixhal_trace(ops.make_linear_scale(1.2), [1.0], 0.01, 10)
    rep = check_increment_contraction(tr, 0.01, 1 / 1.01)
    assert not rep.passed
    assert rep.witness == (1, 2)
    assert reproduce(rep, None, trace=tr)


def test_increment_contraction_short_trace():
    tr = _fixhal_trace(ops.make_linear_scale(0.5), [1.0], 0.3, 2)
    rep = check_increment_contraction(tr, 0.3)
    assert rep.passed and rep.inconclusive


# bounds -------------------------------------------------------------------------

def test_bound_fixed_step_against_oracle():
    res = bound_fixed_step(eps0=1.0, eps=0.01, D_star=1.0, gamma=1.0)
    lam, k = oracle_fixed_step(1, 0.01, 1, 1)
    assert res.lam == pytest.approx(float(lam), rel=1e-15)
    assert res.lam == pytest.approx(0.01 / 4.01, rel=1e-15)
    assert res.k == k == 2122


def test_bound_fixed_step_cases():
    assert bound_fixed_step(eps0=1.0, eps=2.0, D_star=1.0).k == 0
    ks = [bound_fixed_step(eps0=1.0, eps=0.01, D_star=1.0, gamma=g).k for g in (1.0, 0.9, 0.5, 0.1)]
    assert ks == sorted(ks, reverse=True)
    for g in (0.9, 0.5, 0.1):
        lam, k = oracle_fixed_step(1, 0.01, 1, g)
        assert bound_fixed_step(eps0=1.0, eps=0.01, D_star=1.0, gamma=g).k == k
    with pytest.raises(ValueError):
        bound_fixed_step(eps0=1.0, eps=0.01)
    with pytest.raises(GammaOutOfRange):
        bound_fixed_step(eps0=1.0, eps=0.01, D_star=1.0, gamma=1.1)


def test_bound_mild():
    res = bound_mild(eps0=1.0, eps=0.1, gamma=1.0, D=1.0, beta=0.5)
    lam, k = oracle_mild(1, 0.1, 1, 1, 0.5)
    assert res.lam == pytest.approx(0.05 / 1.05, rel=1e-15)
    assert res.k == k
    for g in (1.0001, 1.01, 1.04):
        lam, k = oracle_mild(1, 0.1, g, 1, 0.5)
        assert bound_mild(eps0=1.0, eps=0.1, gamma=g, D=1.0, beta=0.5).k == k
    with pytest.raises(GammaOutOfRange):
        bound_mild(eps0=1.0, eps=0.1, gamma=1.05, D=1.0, beta=0.5)
    ks = [bound_mild(eps0=1.0, eps=0.1, D=1.0, beta=b).k for b in (0.99, 0.9999, 0.999999)]
    assert ks == sorted(ks) and ks[-1] > 2 * ks[0]


def test_bound_corollary():
    res = bound_corollary_mild(eps0=1.0, eps=0.01, gamma=1.5, D=1.0, beta=0.75)
    assert res.lam == 0.5 and res.k == 17
    assert res.error_level == pytest.approx(1.01, rel=1e-15)
    res = bound_corollary_mild(eps0=1.0, eps=0.01, gamma=1.5, D=1.0)
    assert res.error_level == pytest.approx(0.51, rel=1e-15)
    beta = 1 - 0.01 / 3.0
    assert res.lam == pytest.approx(1 - beta / 1.5, rel=1e-14)
    assert res.k == math.ceil(math.log(200) / -math.log(beta))
    near = bound_corollary_mild(eps0=1.0, eps=0.01, gamma=1 + 1e-12, D=1.0)
    assert near.error_level == pytest.approx(0.01, rel=1e-9)
    with pytest.raises(GammaOutOfRange):
        bound_corollary_mild(eps0=1.0, eps=0.01, gamma=1.0, D=1.0, beta=0.5)


def test_bound_leb():
    res = bound_leb(0.5, 1.0)
    lam, k = oracle_leb(0.5, 1.0)
    assert res.lam == pytest.approx(1 / 9, rel=1e-15) and res.k == k == 12
    res = bound_leb(0.5, 4.0)
    assert res.lam == pytest.approx(1 / 3, rel=1e-15) and res.k == 4
    tiny = bound_leb(0.5, 1e-300)
    assert tiny.saturated
    with pytest.raises(ValueError):
        bound_leb(1.0, 1.0)


def test_bound_ghal_expansive_error():
    val = bound_ghal_expansive_error(2.0, 1 + 1e-4, 0.975, 1 / 1.01)
    ref = mp.mpf(2) / mp.mpf(0.975) ** 2 * (mp.mpf(1 + 1e-4) - 1) / (1 - 1 / mp.mpf(1.01))
    assert val == pytest.approx(float(ref), rel=1e-9)
    assert val == pytest.approx(0.02125, abs=1e-5)
    assert bound_ghal_expansive_error(1.0, 1.01, 1.0, 0.0) == pytest.approx(0.01, rel=1e-12)
    assert bound_ghal_expansive_error(1.0, 1 + 1e-15, 0.5, 0.5) < 1e-13
    with pytest.raises(GammaOutOfRange):
        bound_ghal_expansive_error(1.0, 1.0, 0.5, 0.5)


def test_bound_inputs_validation():
    with pytest.raises(ValueError):
        BoundInputs(eps0=-1.0, eps=0.1)
    with pytest.raises(ValueError):
        BoundInputs(eps0=1.0, eps=0.1, beta=1.0)
    inp = BoundInputs(eps0=1.0, eps=0.01, D_star=1.0)
    assert bound_fixed_step(inp).k == 2122
    with pytest.raises(TypeError):
        bound_fixed_step(inp, eps=0.1)


def test_empirical_queries_within_fixed_step_bound():
    spec = ops.make_rotation_hard(100, 1.0)
    x0 = np.zeros(100)
    eps0 = float(np.linalg.norm(spec.apply(x0) - x0))
    d_star = float(np.linalg.norm(x0 - spec.fixed_point()))
    b = bound_fixed_step(eps0=eps0, eps=1e-2, D_star=d_star)
    res = fixhal(CountedOperator(spec), x0, b.lam, SolverConfig(target_eps=1e-2, max_queries=10**6))
    assert res.total_queries - 1 <= b.k
