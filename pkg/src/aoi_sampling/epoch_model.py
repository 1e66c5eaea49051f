"""Epoch/stage stochastic model of the unreliable two-way channel.

An epoch is the interval between consecutive successful deliveries.  Stage j
of an epoch: feedback for the previous attempt arrives after a backward delay
X_j, the source waits Z_j, samples, and the sample lands after a forward delay
Y_j.  The epoch ends at the first success, after a geometric number M of
attempts; the residual transmission sum

    Y' = Y_1 + sum_{j=2..M} (X_j + Y_j)

is the remaining time to the next success once the first sample leaves.

Monte-Carlo expectations used by the solver are evaluated on a frozen pool of
epoch draws (common random numbers), so estimated curves are deterministic
and monotone and bisection terminates cleanly; pools are built once and then
read only.  numpy's pairwise summation keeps reductions deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .distributions import (
    Constant,
    DelayDistribution,
    DiscreteEmpirical,
    RandomSource,
    draw_retry_count,
)
from .penalty import AgePenalty

__all__ = [
    "ModelError",
    "ChannelModel",
    "EpochDraw",
    "McConfig",
    "McEstimate",
    "EpochPool",
    "draw_epoch",
    "draw_epoch_pool",
    "residual_sum",
    "expected_penalty_at",
    "epoch_cost",
    "exact_residual_atoms",
    "exact_zero_wait_average",
]


class ModelError(ValueError):
    """Invalid channel or Monte-Carlo configuration."""


@dataclass(frozen=True)
class ChannelModel:
    """Forward/backward delay distributions plus forward failure probability."""

    alpha: float
    forward: DelayDistribution
    backward: DelayDistribution

    def __post_init__(self):
        if not (0.0 <= self.alpha < 1.0):
            raise ModelError(f"failure probability alpha must be in [0, 1), got {self.alpha}")
        if not (self.forward.mean() > 0.0):
            raise ModelError("forward delay must have mean > 0")


@dataclass(frozen=True)
class McConfig:
    samples: int
    seed: int = 0

    def __post_init__(self):
        if self.samples < 1:
            raise ModelError(f"samples must be >= 1, got {self.samples}")


class McEstimate(NamedTuple):
    value: float
    std_err: float


@dataclass
class EpochDraw:
    """One sampled epoch: previous success delay, first-stage feedback delay,
    retry count, and the stage delays."""

    y_prev: float
    x1: float
    m: int
    xs: list  # backward delays of stages 2..m (length m - 1)
    ys: list  # forward delays of stages 1..m (length m)

    def __post_init__(self):
        if self.m < 1 or len(self.ys) != self.m or len(self.xs) != self.m - 1:
            raise ModelError("epoch draw needs m >= 1 with len(ys) = m and len(xs) = m - 1")


def draw_epoch(channel: ChannelModel, rng: np.random.Generator) -> EpochDraw:
    y_prev = float(channel.forward.sample(rng))
    m = int(draw_retry_count(channel.alpha, rng))
    y1 = float(channel.forward.sample(rng))
    x1 = float(channel.backward.sample(rng))
    xs = [float(channel.backward.sample(rng)) for _ in range(m - 1)]
    ys = [y1] + [float(channel.forward.sample(rng)) for _ in range(m - 1)]
    return EpochDraw(y_prev=y_prev, x1=x1, m=m, xs=xs, ys=ys)


def residual_sum(e: EpochDraw) -> float:
    """Y' = Y_1 + sum_{j=2..m} (X_j + Y_j)."""
    return e.ys[0] + sum(x + y for x, y in zip(e.xs, e.ys[1:]))


@dataclass
class EpochPool:
    """Vectorized pool of epoch draws, built once and then read only.

    ``y_prev`` are i.i.d. forward draws standing in for the previous success;
    ``y_last`` is the delivered attempt's forward delay, which the simulator
    chains into the next epoch's age reset.
    """

    y_prev: np.ndarray
    x1: np.ndarray
    m: np.ndarray
    y1: np.ndarray
    x2: np.ndarray  # backward delay of stage 2 (0 where m == 1)
    rest: np.ndarray  # sum_{j=2..m} (X_j + Y_j)
    y_last: np.ndarray
    stage_xs: np.ndarray | None = field(default=None, repr=False)
    stage_ys: np.ndarray | None = field(default=None, repr=False)
    offsets: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.y_prev.size

    @property
    def yprime(self) -> np.ndarray:
        return self.y1 + self.rest

    @property
    def total_delay(self) -> np.ndarray:
        """sum_{j=1..m} (X_j + Y_j) = X_1 + Y'."""
        return self.x1 + self.yprime


def draw_epoch_pool(
    channel: ChannelModel,
    n: int,
    rng: np.random.Generator,
    keep_stage_arrays: bool = False,
) -> EpochPool:
    """Draw ``n`` epochs in one pass.

    The draw order is fixed (y_prev, m, y1, x1, then the retry stages), so a
    given generator state always yields the same pool regardless of
    ``keep_stage_arrays``.
    """
    if n < 1:
        raise ModelError(f"pool size must be >= 1, got {n}")
    y_prev = np.asarray(channel.forward.sample(rng, n), dtype=float)
    m = np.asarray(draw_retry_count(channel.alpha, rng, n), dtype=np.int64)
    y1 = np.asarray(channel.forward.sample(rng, n), dtype=float)
    x1 = np.asarray(channel.backward.sample(rng, n), dtype=float)

    retries = m - 1
    total = int(retries.sum())
    if total > 0:
        xs_extra = np.asarray(channel.backward.sample(rng, total), dtype=float)
        ys_extra = np.asarray(channel.forward.sample(rng, total), dtype=float)
    else:
        xs_extra = np.empty(0)
        ys_extra = np.empty(0)

    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(retries, out=offsets[1:])
    pair = xs_extra + ys_extra
    csum = np.concatenate([[0.0], np.cumsum(pair)])
    rest = csum[offsets[1:]] - csum[offsets[:-1]]

    has_retry = retries > 0
    x2 = np.zeros(n)
    x2[has_retry] = xs_extra[offsets[:-1][has_retry]]
    y_last = y1.copy()
    y_last[has_retry] = ys_extra[offsets[1:][has_retry] - 1]

    return EpochPool(
        y_prev=y_prev,
        x1=x1,
        m=m,
        y1=y1,
        x2=x2,
        rest=rest,
        y_last=y_last,
        stage_xs=xs_extra if keep_stage_arrays else None,
        stage_ys=ys_extra if keep_stage_arrays else None,
        offsets=offsets if keep_stage_arrays else None,
    )


def expected_penalty_at(c, channel: ChannelModel, p: AgePenalty, mc: McConfig) -> McEstimate:
    """Monte-Carlo estimate of E[p(c + Y')].

    The pool is rebuilt from ``mc.seed``, so sweeping c with the same config
    reuses common random numbers and the estimate is exactly non-decreasing
    in c.
    """
    if c < 0.0:
        raise ModelError(f"offset c must be >= 0, got {c}")
    pool = draw_epoch_pool(channel, mc.samples, RandomSource(mc.seed).generator())
    vals = p.eval(c + pool.yprime)
    return McEstimate(float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(pool.n)) if pool.n > 1 else 0.0)


def epoch_cost(e: EpochDraw, z: float, p: AgePenalty, beta: float) -> float:
    """Ratio-free per-epoch cost of waiting ``z`` at stage 1 (zero afterwards):
    integral of p over the epoch's age span minus beta times the epoch length
    past the previous delivery."""
    if z < 0.0:
        raise ModelError(f"waiting time must be >= 0, got {z}")
    yp = residual_sum(e)
    length = e.x1 + z + yp
    return float(p.integral(e.y_prev, e.y_prev + length)) - beta * length


# -- exact small-instance path (deterministic oracles for tests) --------------


def _atoms_of(dist: DelayDistribution):
    if isinstance(dist, Constant):
        return [(dist.value, 1.0)]
    if isinstance(dist, DiscreteEmpirical):
        return list(dist.atoms)
    raise ModelError("exact expectations need constant or empirical delays")


def _convolve(a, b, cap=200_000):
    out: dict[float, float] = {}
    for va, pa in a:
        for vb, pb in b:
            key = va + vb
            out[key] = out.get(key, 0.0) + pa * pb
    if len(out) > cap:
        raise ModelError("exact residual distribution grew too large")
    return sorted(out.items())


def exact_residual_atoms(channel: ChannelModel, tol: float = 1e-12):
    """Distribution of Y' as (value, probability) atoms, truncating the
    geometric retry series once its tail weight drops below ``tol``."""
    y_atoms = _atoms_of(channel.forward)
    alpha = channel.alpha
    if alpha == 0.0:
        return list(y_atoms)
    pair = _convolve(_atoms_of(channel.backward), y_atoms)
    k_max = max(1, math.ceil(math.log(tol) / math.log(alpha)))
    out: dict[float, float] = {}
    conv = list(y_atoms)
    weight = 1.0 - alpha
    for _ in range(k_max):
        for v, p in conv:
            out[v] = out.get(v, 0.0) + weight * p
        conv = _convolve(conv, pair)
        weight *= alpha
    return sorted(out.items())


def exact_zero_wait_average(channel: ChannelModel, p: AgePenalty, tol: float = 1e-12) -> float:
    """Exact long-run average penalty of the zero-wait policy on a constant or
    empirical channel: E[int_Y^{Y+X+Y'} p] / E[X + Y']."""
    y_atoms = _atoms_of(channel.forward)
    x_atoms = _atoms_of(channel.backward)
    r_atoms = exact_residual_atoms(channel, tol)
    num = 0.0
    den = 0.0
    for y, py in y_atoms:
        for x, px in x_atoms:
            for v, pv in r_atoms:
                w = py * px * pv
                num += w * p.integral(y, y + x + v)
                den += w * (x + v)
    return num / den
