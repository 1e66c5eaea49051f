"""Optimal sampling for data freshness over an unreliable channel with random
two-way delays.

The library computes the optimal threshold sampling policy (Dinkelbach
bisection over a per-epoch threshold solve), evaluates it against the four
standard baseline policies with a renewal-reward simulator, and ships the
bounded estimation-error age penalty of a scalar OU source tracked by a
Kalman-Bucy filter.
"""

from .distributions import (
    Constant,
    DelayDistribution,
    DiscreteEmpirical,
    DistributionError,
    Exponential,
    Lognormal,
    RandomSource,
    draw,
    draw_retry_count,
    mean,
    parse_distribution,
    support_inf,
)
from .epoch_model import (
    ChannelModel,
    EpochDraw,
    EpochPool,
    McConfig,
    McEstimate,
    ModelError,
    draw_epoch,
    draw_epoch_pool,
    epoch_cost,
    exact_residual_atoms,
    exact_zero_wait_average,
    expected_penalty_at,
    residual_sum,
)
from .penalty import (
    AgePenalty,
    AssumptionReport,
    Floor,
    Linear,
    OuMmse,
    OuParams,
    PenaltyBounds,
    PenaltyError,
    Power,
    classify_assumption,
    ou_mmse_closed,
    ou_mmse_numeric,
    parse_penalty,
    penalty_bounds,
)
from .simulator import (
    BaselineRun,
    OneWay,
    OneWayErrorFree,
    OptimalSampling,
    SamplingPolicy,
    SimResult,
    SimTrace,
    TwoWayErrorFree,
    ZeroWait,
    run,
    run_all_baselines,
    waiting_time,
)
from .solver import (
    AssumptionNotVerifiedError,
    BracketingError,
    FBetaEval,
    OptimalPolicy,
    SolverConfig,
    SolverError,
    UnboundedThresholdError,
    ZeroWaitReport,
    f_beta,
    feasibility_zbar,
    q_gap,
    solve_beta,
    threshold_b,
    zero_wait_optimal,
)

__version__ = "0.1.0"
