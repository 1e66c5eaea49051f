"""Delay distributions for the forward channel, the backward channel, and the
geometric retry count.

Distributions are immutable value objects.  Sampling goes through a numpy
``Generator``; :class:`RandomSource` pins the (seed, stream) pair so that every
experiment is reproducible and parallel substreams stay independent of
scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DistributionError",
    "RandomSource",
    "DelayDistribution",
    "Constant",
    "Lognormal",
    "Exponential",
    "DiscreteEmpirical",
    "draw",
    "mean",
    "support_inf",
    "support_sup",
    "draw_retry_count",
    "parse_distribution",
    "format_distribution",
]


class DistributionError(ValueError):
    """Invalid distribution parameters or specification string."""


@dataclass(frozen=True)
class RandomSource:
    """Reproducible RNG handle.

    Identical ``(seed, stream)`` pairs yield identical draw sequences; distinct
    streams are statistically independent (seeded via ``SeedSequence`` spawn
    keys, so reproducibility does not depend on scheduling).
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.default_rng(ss)

    def split(self, n: int) -> list["RandomSource"]:
        """Derive ``n`` independent substreams of this source."""
        base = self.stream * 1_000_003
        return [RandomSource(self.seed, base + k + 1) for k in range(n)]


class DelayDistribution:
    """Base class for nonnegative random delays with finite mean."""

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def support_inf(self) -> float:
        """Largest t with P(draw < t) = 0."""
        raise NotImplementedError

    def support_sup(self) -> float:
        """Smallest t with P(draw > t) = 0 (``inf`` when unbounded)."""
        raise NotImplementedError

    def moment_finite(self, k: float) -> bool:
        """Whether E[draw^k] is finite.  True for every built-in family."""
        return True


@dataclass(frozen=True)
class Constant(DelayDistribution):
    value: float

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value >= 0.0):
            raise DistributionError(f"constant delay must be finite and >= 0, got {self.value}")

    def sample(self, rng, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value, dtype=float)

    def mean(self):
        return self.value

    def support_inf(self):
        return self.value

    def support_sup(self):
        return self.value


@dataclass(frozen=True)
class Lognormal(DelayDistribution):
    """Draws exp(sigma * Z) with Z standard normal (scale parameter only)."""

    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise DistributionError(f"lognormal scale must be > 0, got {self.sigma}")

    def sample(self, rng, size=None):
        z = rng.standard_normal(size)
        out = np.exp(self.sigma * z)
        return float(out) if size is None else out

    def mean(self):
        return math.exp(0.5 * self.sigma**2)

    def support_inf(self):
        return 0.0

    def support_sup(self):
        return math.inf


@dataclass(frozen=True)
class Exponential(DelayDistribution):
    """Exponential delay; ``scale`` equals the mean."""

    scale: float

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0.0):
            raise DistributionError(f"exponential mean must be > 0, got {self.scale}")

    def sample(self, rng, size=None):
        out = rng.exponential(self.scale, size)
        return float(out) if size is None else out

    def mean(self):
        return self.scale

    def support_inf(self):
        return 0.0

    def support_sup(self):
        return math.inf


@dataclass(frozen=True)
class DiscreteEmpirical(DelayDistribution):
    """Finite mixture of point masses; probabilities must sum to 1."""

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        atoms = tuple((float(t), float(p)) for t, p in self.atoms)
        if not atoms:
            raise DistributionError("empirical distribution needs at least one atom")
        total = 0.0
        for t, p in atoms:
            if not (math.isfinite(t) and t >= 0.0):
                raise DistributionError(f"atom time must be finite and >= 0, got {t}")
            if not (0.0 < p <= 1.0):
                raise DistributionError(f"atom probability must be in (0, 1], got {p}")
            total += p
        if abs(total - 1.0) > 1e-9:
            raise DistributionError(f"atom probabilities sum to {total}, expected 1")
        object.__setattr__(self, "atoms", atoms)

    def _arrays(self):
        values = np.array([t for t, _ in self.atoms])
        probs = np.array([p for _, p in self.atoms])
        return values, probs / probs.sum()

    def sample(self, rng, size=None):
        values, probs = self._arrays()
        idx = rng.choice(len(values), size=size, p=probs)
        out = values[idx]
        return float(out) if size is None else out

    def mean(self):
        values, probs = self._arrays()
        return float(values @ probs)

    def support_inf(self):
        return min(t for t, _ in self.atoms)

    def support_sup(self):
        return max(t for t, _ in self.atoms)


def draw(dist: DelayDistribution, rng: np.random.Generator) -> float:
    """One sample from ``dist``; the generator state advances."""
    return float(dist.sample(rng))


def mean(dist: DelayDistribution) -> float:
    return dist.mean()


def support_inf(dist: DelayDistribution) -> float:
    return dist.support_inf()


def support_sup(dist: DelayDistribution) -> float:
    return dist.support_sup()


def draw_retry_count(alpha: float, rng: np.random.Generator, size=None):
    """Number of transmission attempts until the first success.

    P(M = m) = alpha^(m-1) * (1 - alpha) for m = 1, 2, ...
    """
    if not (0.0 <= alpha < 1.0):
        raise DistributionError(f"failure probability must be in [0, 1), got {alpha}")
    if alpha == 0.0:
        return 1 if size is None else np.ones(size, dtype=np.int64)
    out = rng.geometric(1.0 - alpha, size)
    return int(out) if size is None else out


def parse_distribution(text: str) -> DelayDistribution:
    """Parse ``constant:<v>``, ``lognormal:<sigma>``, ``exponential:<mean>``,
    or ``empirical:<t1>:<p1>,<t2>:<p2>,...``."""
    head, _, rest = text.strip().partition(":")
    kind = head.strip().lower()
    try:
        if kind == "constant":
            return Constant(float(rest))
        if kind == "lognormal":
            return Lognormal(float(rest))
        if kind == "exponential":
            return Exponential(float(rest))
        if kind == "empirical":
            pairs = []
            for chunk in rest.split(","):
                t, _, p = chunk.partition(":")
                pairs.append((float(t), float(p)))
            return DiscreteEmpirical(tuple(pairs))
    except DistributionError:
        raise
    except ValueError as exc:
        raise DistributionError(f"cannot parse distribution spec {text!r}: {exc}") from None
    raise DistributionError(f"unknown distribution kind {kind!r} in {text!r}")


def format_distribution(dist: DelayDistribution) -> str:
    if isinstance(dist, Constant):
        return f"constant:{dist.value:g}"
    if isinstance(dist, Lognormal):
        return f"lognormal:{dist.sigma:g}"
    if isinstance(dist, Exponential):
        return f"exponential:{dist.scale:g}"
    if isinstance(dist, DiscreteEmpirical):
        return "empirical:" + ",".join(f"{t:g}:{p:g}" for t, p in dist.atoms)
    raise DistributionError(f"cannot format {dist!r}")
