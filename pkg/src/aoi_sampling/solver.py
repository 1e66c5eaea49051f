"""Optimal sampling policy: inner threshold solve, outer Dinkelbach bisection,
zero-wait optimality test, waiting-cap feasibility check, and a Q-function
validation probe.

The long-run average penalty minimization is a ratio problem; the Dinkelbach
transform turns it into root finding on

    f(beta) = f1(beta) - beta * f2(beta),

where f1 is the expected penalty integral over one epoch and f2 the expected
epoch length under the best threshold rule for that beta.  f is concave and
strictly decreasing with a unique root, and the root equals the optimal
average penalty.  The optimal rule waits

    z(delta, x) = max(b - delta - x, 0)

after a success and zero after a failure, where b is the smallest age offset
whose expected penalty at the next delivery reaches beta.

Both root-finds run against one frozen pool of epoch draws, which makes every
estimated curve deterministic and monotone in its argument, so bisection is
exact on the estimate; the pool's sampling error is reported once through
standard errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import RandomSource
from .epoch_model import ChannelModel, EpochPool, McConfig, McEstimate, draw_epoch_pool
from .penalty import AgePenalty, classify_assumption

__all__ = [
    "SolverError",
    "UnboundedThresholdError",
    "BracketingError",
    "AssumptionNotVerifiedError",
    "SolverConfig",
    "FBetaEval",
    "OptimalPolicy",
    "ZeroWaitReport",
    "threshold_b",
    "f_beta",
    "solve_beta",
    "zero_wait_optimal",
    "feasibility_zbar",
    "q_gap",
]

_HUGE_THRESHOLD = 1e18


class SolverError(RuntimeError):
    """Base class for solve failures."""


class UnboundedThresholdError(SolverError):
    """No finite age offset reaches the requested expected penalty."""


class BracketingError(SolverError):
    """The outer bisection could not bracket a sign change."""


class AssumptionNotVerifiedError(SolverError):
    """The sufficient-condition scan failed and the caller did not override."""


@dataclass(frozen=True)
class SolverConfig:
    tol_beta: float = 1e-4
    tol_b: float = 1e-6
    mc: McConfig = field(default_factory=lambda: McConfig(samples=200_000, seed=0))
    bracket_hint: tuple[float, float] | None = None
    max_iter: int = 200
    allow_unverified_assumption: bool = False

    def __post_init__(self):
        if self.tol_beta <= 0.0 or self.tol_b <= 0.0:
            raise ValueError("tolerances must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.bracket_hint is not None:
            k1, k2 = self.bracket_hint
            if not k1 < k2:
                raise ValueError("bracket hint needs k1 < k2")


@dataclass(frozen=True)
class FBetaEval:
    """One Dinkelbach evaluation: f1 (penalty integral term), f2 (epoch length
    term), f = f1 - beta*f2, and the pool standard error of f."""

    f1: float
    f2: float
    f: float
    std_err: float

    def __post_init__(self):
        if not self.f2 > 0.0:
            raise SolverError("epoch length term f2 must be > 0")


@dataclass(frozen=True)
class OptimalPolicy:
    """Solved threshold policy: beta is the optimal long-run average penalty,
    b the age-offset threshold of the waiting rule max(b - delta - x, 0)."""

    beta: float
    b: float
    channel: ChannelModel
    penalty: AgePenalty
    bracket: tuple[float, float] = (math.nan, math.nan)
    beta_std_err: float = math.nan
    samples: int = 0

    def __post_init__(self):
        bounds = self.penalty.bounds()
        if not (bounds.p_lower - 1e-9 <= self.beta <= bounds.p_upper + 1e-9):
            raise SolverError(
                f"beta={self.beta} outside penalty bounds [{bounds.p_lower}, {bounds.p_upper}]"
            )
        if self.b < 0.0:
            raise SolverError(f"threshold b must be >= 0, got {self.b}")

    def waiting_time(self, delta, x):
        """Wait max(b - delta - x, 0); zero whenever delta + x >= b."""
        out = np.maximum(self.b - np.asarray(delta, dtype=float) - np.asarray(x, dtype=float), 0.0)
        return float(out) if np.isscalar(delta) and np.isscalar(x) else out


@dataclass(frozen=True)
class ZeroWaitReport:
    optimal: bool
    margin: float
    std_err: float


def _pool_for(channel: ChannelModel, cfg: SolverConfig) -> EpochPool:
    return draw_epoch_pool(channel, cfg.mc.samples, RandomSource(cfg.mc.seed).generator())


def _mean_penalty_at(c: float, pool: EpochPool, p: AgePenalty) -> float:
    return float(np.mean(p.eval(c + pool.yprime)))


def threshold_b(
    beta: float,
    channel: ChannelModel,
    p: AgePenalty,
    cfg: SolverConfig,
    pool: EpochPool | None = None,
) -> float:
    """Smallest c >= 0 with E[p(c + Y')] >= beta on the frozen pool.

    Bracket doubling followed by bisection to ``cfg.tol_b``; the final
    bracket's left endpoint realizes the infimum to within the tolerance.
    """
    if pool is None:
        pool = _pool_for(channel, cfg)
    if _mean_penalty_at(0.0, pool, p) >= beta:
        return 0.0
    lo = 0.0
    hi = max(cfg.tol_b, 1.0)
    while _mean_penalty_at(hi, pool, p) < beta:
        lo = hi
        hi *= 2.0
        if hi > _HUGE_THRESHOLD:
            raise UnboundedThresholdError(
                f"no age offset reaches expected penalty {beta:g}; "
                "beta exceeds the reachable penalty range"
            )
    while hi - lo > cfg.tol_b:
        mid = 0.5 * (lo + hi)
        if _mean_penalty_at(mid, pool, p) >= beta:
            hi = mid
        else:
            lo = mid
    return lo


def f_beta(
    beta: float,
    channel: ChannelModel,
    p: AgePenalty,
    cfg: SolverConfig,
    pool: EpochPool | None = None,
) -> FBetaEval:
    """Evaluate f1, f2, and f = f1 - beta*f2 under the threshold rule for
    ``beta`` on the frozen pool."""
    if pool is None:
        pool = _pool_for(channel, cfg)
    b = threshold_b(beta, channel, p, cfg, pool=pool)
    z = np.maximum(b - pool.y_prev - pool.x1, 0.0)
    length = pool.x1 + z + pool.yprime
    integ = p.integral(pool.y_prev, pool.y_prev + length)
    per_draw = integ - beta * length
    n = pool.n
    se = float(np.std(per_draw, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return FBetaEval(
        f1=float(np.mean(integ)), f2=float(np.mean(length)), f=float(np.mean(per_draw)), std_err=se
    )


def _zero_wait_ratio(pool: EpochPool, p: AgePenalty):
    num = p.integral(pool.y_prev, pool.y_prev + pool.x1 + pool.yprime)
    den = pool.x1 + pool.yprime
    return num, den, float(np.mean(num)) / float(np.mean(den))


def solve_beta(channel: ChannelModel, p: AgePenalty, cfg: SolverConfig) -> OptimalPolicy:
    """Bisection on f(beta) down to ``cfg.tol_beta`` bracket width.

    The initial bracket is [p(0) + eps, zero-wait average], since the
    zero-wait policy is feasible and therefore upper-bounds the optimum even
    when the penalty is unbounded; the upper end doubles outward if the pool
    estimate disagrees.
    """
    report = classify_assumption(p, channel)
    if not report.satisfied and not cfg.allow_unverified_assumption:
        raise AssumptionNotVerifiedError(
            "could not verify a sufficient condition for the threshold solve "
            f"({report.detail}); pass allow_unverified_assumption=True to proceed"
        )

    pool = _pool_for(channel, cfg)
    bounds = p.bounds()

    if cfg.bracket_hint is not None:
        k1, k2 = cfg.bracket_hint
    else:
        k1 = bounds.p_lower + 1e-9
        _, _, k2 = _zero_wait_ratio(pool, p)
        if k2 <= k1:
            k2 = k1 + max(1.0, abs(k1))

    f_lo = f_beta(k1, channel, p, cfg, pool=pool)
    if f_lo.f <= 0.0:
        # Root at or below the lower penalty bound (degenerate penalty); the
        # zero-wait rule is then optimal at beta = k1.
        b = threshold_b(k1, channel, p, cfg, pool=pool)
        return OptimalPolicy(
            beta=k1, b=b, channel=channel, penalty=p, bracket=(k1, k1),
            beta_std_err=f_lo.std_err / f_lo.f2, samples=pool.n,
        )

    f_hi = f_beta(k2, channel, p, cfg, pool=pool)
    doublings = 0
    while f_hi.f > 0.0:
        doublings += 1
        if doublings > cfg.max_iter:
            raise BracketingError(
                f"no sign change of f(beta) up to beta={k2:g} after {doublings - 1} expansions"
            )
        k1 = k2
        width = max(k2 - bounds.p_lower, 1.0)
        k2 = k2 + width
        if math.isfinite(bounds.p_upper):
            k2 = min(k2, bounds.p_upper - 1e-12)
            if k2 <= k1:
                raise BracketingError("f(beta) stays positive up to the penalty's upper bound")
        f_hi = f_beta(k2, channel, p, cfg, pool=pool)

    iterations = 0
    while k2 - k1 >= cfg.tol_beta:
        iterations += 1
        if iterations > cfg.max_iter:
            raise BracketingError(
                f"bisection did not reach tolerance {cfg.tol_beta:g} in {cfg.max_iter} iterations"
            )
        beta = 0.5 * (k1 + k2)
        fe = f_beta(beta, channel, p, cfg, pool=pool)
        if fe.f < 0.0:
            k2 = beta
        else:
            k1 = beta
    beta = 0.5 * (k1 + k2)
    fe = f_beta(beta, channel, p, cfg, pool=pool)
    b = threshold_b(beta, channel, p, cfg, pool=pool)
    return OptimalPolicy(
        beta=beta,
        b=b,
        channel=channel,
        penalty=p,
        bracket=(k1, k2),
        beta_std_err=fe.std_err / fe.f2,
        samples=pool.n,
    )


def zero_wait_optimal(channel: ChannelModel, p: AgePenalty, cfg: SolverConfig) -> ZeroWaitReport:
    """Test whether never waiting is optimal.

    Compares the essential infimum of the expected penalty at the next
    delivery (attained at the smallest possible current age, since the
    conditional expectation is non-decreasing in it) against the zero-wait
    average penalty; non-negative margin means zero-wait is optimal.
    """
    pool = _pool_for(channel, cfg)
    state_inf = channel.forward.support_inf() + channel.backward.support_inf()
    lhs = p.eval(state_inf + pool.yprime)
    num, den, ratio = _zero_wait_ratio(pool, p)
    margin = float(np.mean(lhs)) - ratio
    # Delta-method linearization of mean(lhs) - num/den around the estimates.
    den_mean = float(np.mean(den))
    per_draw = lhs - (num - ratio * den) / den_mean
    se = float(np.std(per_draw, ddof=1) / math.sqrt(pool.n)) if pool.n > 1 else 0.0
    return ZeroWaitReport(optimal=margin >= 0.0, margin=margin, std_err=se)


def feasibility_zbar(channel: ChannelModel, p: AgePenalty, zbar: float, cfg: SolverConfig) -> bool:
    """Whether the waiting cap ``zbar`` satisfies p(zbar) >= zero-wait average
    (a cap that large never binds the optimal rule)."""
    if zbar < 0.0:
        raise ValueError(f"zbar must be >= 0, got {zbar}")
    pool = _pool_for(channel, cfg)
    _, _, ratio = _zero_wait_ratio(pool, p)
    return bool(p.eval(zbar) >= ratio)


def q_gap(policy: OptimalPolicy, delta: float, x: float, z: float, cfg: SolverConfig) -> McEstimate:
    """Estimate Q(delta, x, z) - J(delta, x) for the solved policy on common
    draws.

    Q waits z at stage 1 and follows the threshold rule afterwards; J follows
    the rule from stage 1.  With z below the rule's wait, the stage-2 wait can
    become positive (the rule tops the age back up to b); from stage 3 on the
    accumulated age exceeds b, so later waits vanish for both rollouts.  The
    true gap is >= 0 everywhere and the estimate is exactly 0 at the rule's
    own wait.
    """
    if z < 0.0 or delta < 0.0 or x < 0.0:
        raise ValueError("delta, x, z must all be >= 0")
    pool = _pool_for(policy.channel, cfg)
    p = policy.penalty
    b = policy.b
    beta = policy.beta

    def rollout_cost(z1: float) -> np.ndarray:
        z2 = np.where(
            pool.m >= 2,
            np.maximum(b - (delta + x + z1 + pool.y1 + pool.x2), 0.0),
            0.0,
        )
        length = x + z1 + z2 + pool.yprime
        return p.integral(delta, delta + length) - beta * length

    diff = rollout_cost(z) - rollout_cost(policy.waiting_time(delta, x))
    se = float(np.std(diff, ddof=1) / math.sqrt(pool.n)) if pool.n > 1 else 0.0
    return McEstimate(float(np.mean(diff)), se)
