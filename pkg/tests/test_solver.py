"""Solver oracles.

Constant channels admit exact arithmetic (degenerate pools), so threshold,
f(beta), and the solved optimum are checked against closed-form values; the
heavy-tailed configuration is checked against its own simulation and the
zero-wait criterion.
"""

import math

import numpy as np
import pytest

from aoi_sampling.distributions import Constant, Lognormal
from aoi_sampling.epoch_model import ChannelModel, McConfig
from aoi_sampling.penalty import AgePenalty, Linear, OuMmse, OuParams, PenaltyBounds
from aoi_sampling.simulator import ZeroWait, run
from aoi_sampling.solver import (
    AssumptionNotVerifiedError,
    BracketingError,
    OptimalPolicy,
    SolverConfig,
    SolverError,
    UnboundedThresholdError,
    f_beta,
    feasibility_zbar,
    q_gap,
    solve_beta,
    threshold_b,
    zero_wait_optimal,
)

SAWTOOTH = ChannelModel(0.0, Constant(1.0), Constant(0.0))
UNRELIABLE = ChannelModel(0.5, Constant(1.0), Constant(0.5))
HEAVY = ChannelModel(0.8, Lognormal(1.5), Lognormal(1.5))
P1 = Linear(1.0)


def cfg(samples=100_000, seed=0, **kw):
    return SolverConfig(mc=McConfig(samples=samples, seed=seed), **kw)


def test_threshold_constant_channel():
    c = cfg(samples=1000)
    assert threshold_b(1.5, SAWTOOTH, P1, c) == pytest.approx(0.5, abs=2e-6)
    assert threshold_b(0.0, SAWTOOTH, P1, c) == 0.0  # beta = p(0) already met at c = 0


def test_threshold_zero_when_expected_penalty_already_reached():
    # E[p(Y')] = 2.5 >= beta, so no waiting offset is needed (up to pool noise)
    assert threshold_b(2.5, UNRELIABLE, P1, cfg(samples=200_000, seed=4)) <= 0.02


def test_threshold_unbounded_for_bounded_penalty():
    p = OuMmse(OuParams(1.0, 1.0, 1.0, 1.0))  # penalty capped at sqrt(2)-1
    with pytest.raises(UnboundedThresholdError):
        threshold_b(1.0, SAWTOOTH, p, cfg(samples=1000))


def test_f_beta_constant_channel_values():
    c = cfg(samples=1000)
    assert f_beta(1.0, SAWTOOTH, P1, c).f == pytest.approx(0.5, abs=1e-5)
    assert f_beta(1.5, SAWTOOTH, P1, c).f == pytest.approx(0.0, abs=1e-5)
    # b(2.0) = 1 but the recurrent state has age 1 already, so no wait happens
    assert f_beta(2.0, SAWTOOTH, P1, c).f == pytest.approx(-0.5, abs=1e-5)


def test_f_beta_components():
    ev = f_beta(1.0, SAWTOOTH, P1, cfg(samples=1000))
    assert ev.f1 == pytest.approx(1.5, abs=1e-9)
    assert ev.f2 == pytest.approx(1.0, abs=1e-9)
    assert ev.f == pytest.approx(ev.f1 - 1.0 * ev.f2, abs=1e-12)


def test_solve_constant_channel():
    policy = solve_beta(SAWTOOTH, P1, cfg(samples=1000, tol_beta=1e-4))
    assert abs(policy.beta - 1.5) <= 1e-4
    assert abs(policy.b - 0.5) <= 1e-3
    lo, hi = policy.bracket
    assert hi - lo < 1e-4
    # zero-wait equivalent: the recurrent state (age=1, x=0) never waits
    assert policy.waiting_time(1.0, 0.0) == 0.0


def test_solve_unreliable_constant_channel():
    policy = solve_beta(UNRELIABLE, P1, cfg(samples=400_000, seed=8, tol_beta=1e-4))
    tol = max(1e-3, 3 * policy.beta_std_err)
    assert abs(policy.beta - 3.25) <= tol
    report = zero_wait_optimal(UNRELIABLE, P1, cfg(samples=400_000, seed=8))
    assert report.optimal


def test_solve_respects_bracket_hint():
    policy = solve_beta(SAWTOOTH, P1, cfg(samples=1000, bracket_hint=(1.0, 2.0)))
    assert abs(policy.beta - 1.5) <= 1e-4


def test_solve_heavy_tail_beats_zero_wait():
    # the averages sit near 85 here, so resolving the ~3.5 gap at 5 s.e.
    # needs large budgets (heavy-tailed per-epoch noise)
    p = Linear(2.0)
    policy = solve_beta(HEAVY, p, cfg(samples=1_500_000, seed=3))
    sim = run(ZeroWait(), HEAVY, p, 3_000_000, seed=11)
    gap = sim.avg_penalty - policy.beta
    combined = math.hypot(sim.std_err, policy.beta_std_err)
    assert gap > 5 * combined


def test_f_monotone_nonincreasing_on_grid():
    c = cfg(samples=50_000, seed=6)
    for channel, p in ((UNRELIABLE, P1), (HEAVY, Linear(2.0))):
        zw = run(ZeroWait(), channel, p, 50_000, seed=1).avg_penalty
        # stretch past the zero-wait average so the root is interior
        grid = np.linspace(1e-9, 1.1 * zw, 20)
        vals = [f_beta(float(b), channel, p, c).f for b in grid]
        assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))
        signs = [v < 0 for v in vals]
        assert sum(a != b for a, b in zip(signs, signs[1:])) == 1


def test_zero_wait_reports():
    report = zero_wait_optimal(SAWTOOTH, P1, cfg(samples=1000))
    assert report.optimal and report.margin == pytest.approx(0.5, abs=1e-12)
    # constant channels are always zero-wait optimal, any failure probability
    for alpha in (0.0, 0.3, 0.9):
        channel = ChannelModel(alpha, Constant(1.0), Constant(0.5))
        assert zero_wait_optimal(channel, P1, cfg(samples=100_000, seed=5)).optimal
    report = zero_wait_optimal(HEAVY, Linear(2.0), cfg(samples=200_000, seed=9))
    assert not report.optimal
    assert report.margin < -5 * report.std_err


def test_zero_wait_policy_never_waits_when_optimal():
    policy = solve_beta(UNRELIABLE, P1, cfg(samples=200_000, seed=8))
    # the threshold never binds: every reachable state has age + backward >= b
    state_inf = UNRELIABLE.forward.support_inf() + UNRELIABLE.backward.support_inf()
    assert policy.b <= state_inf + 1e-2


def test_feasibility_zbar():
    assert feasibility_zbar(SAWTOOTH, P1, 2.0, cfg(samples=1000))
    assert not feasibility_zbar(SAWTOOTH, P1, 1.0, cfg(samples=1000))
    p = OuMmse(OuParams(1.0, 1.0, 1.0, 1.0))
    assert feasibility_zbar(HEAVY, p, 50.0, cfg(samples=50_000, seed=2))
    with pytest.raises(ValueError):
        feasibility_zbar(SAWTOOTH, P1, -1.0, cfg(samples=1000))


def test_q_gap_zero_at_own_wait_and_positive_elsewhere():
    policy = solve_beta(SAWTOOTH, P1, cfg(samples=1000))
    for delta, x in ((1.0, 0.0), (0.1, 0.05), (3.0, 1.0)):
        mu = policy.waiting_time(delta, x)
        est = q_gap(policy, delta, x, mu, cfg(samples=1000))
        assert est.value == 0.0 and est.std_err == 0.0
    # closed-form case: J(1, 0) = 0, Q(1, 0, 1) = 1
    est = q_gap(policy, 1.0, 0.0, 1.0, cfg(samples=1000))
    assert est.value == pytest.approx(1.0, abs=3e-3)


def test_q_gap_nonnegative_on_random_probes():
    policy = solve_beta(HEAVY, Linear(2.0), cfg(samples=100_000, seed=3))
    rng = np.random.default_rng(17)
    probe = cfg(samples=50_000, seed=14)
    for _ in range(25):
        delta = float(rng.uniform(0.0, 2.0 * policy.b + 1.0))
        x = float(rng.uniform(0.0, policy.b + 1.0))
        z = float(rng.uniform(0.0, 2.0 * policy.b + 1.0))
        est = q_gap(policy, delta, x, z, probe)
        assert est.value >= -3.0 * est.std_err


def test_assumption_gate():
    class Unclassifiable(AgePenalty):
        def _eval(self, arr):
            return np.exp(arr) - 1.0

        def _antiderivative(self, t):
            return np.exp(t) - t

        def bounds(self):
            return PenaltyBounds(0.0, math.inf)

    channel = ChannelModel(0.5, Lognormal(0.5), Constant(0.1))
    with pytest.raises(AssumptionNotVerifiedError):
        solve_beta(channel, Unclassifiable(), cfg(samples=2000))
    policy = solve_beta(channel, Unclassifiable(), cfg(samples=2000, allow_unverified_assumption=True))
    assert policy.beta > 0.0


def test_bracketing_error_when_iteration_budget_exhausted():
    with pytest.raises(BracketingError):
        solve_beta(HEAVY, Linear(2.0), cfg(samples=5000, max_iter=1, tol_beta=1e-9))


def test_optimal_policy_validation():
    with pytest.raises(SolverError):
        OptimalPolicy(beta=-1.0, b=0.5, channel=SAWTOOTH, penalty=P1)
    with pytest.raises(SolverError):
        OptimalPolicy(beta=1.0, b=-0.5, channel=SAWTOOTH, penalty=P1)
    policy = OptimalPolicy(beta=1.5, b=3.0, channel=SAWTOOTH, penalty=P1)
    assert policy.waiting_time(1.0, 0.5) == pytest.approx(1.5)
    assert policy.waiting_time(4.0, 0.0) == 0.0


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol_beta=0.0)
    with pytest.raises(ValueError):
        SolverConfig(bracket_hint=(2.0, 1.0))
