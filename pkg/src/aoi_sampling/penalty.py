"""Non-decreasing age-penalty functions with exact integrals.

Besides the elementary families (linear, power, floor), this module implements
the estimation-error penalty of a scalar Ornstein-Uhlenbeck source watched
through a noisy side observation: between sample deliveries the Kalman-Bucy
error variance n(t) obeys the Riccati equation

    dn/dt = -2*theta*n + sigma^2 - (h^2 / r) * n^2,    n(0) = 0,

whose closed form (via the Bernoulli substitution) is

    n(t) = nbar - 1 / (l + (1/nbar - l) * exp(2*a*t)),
    a    = sqrt(theta^2 + sigma^2 h^2 / r),
    nbar = (-theta*r + sqrt((theta*r)^2 + sigma^2 r h^2)) / h^2,
    l    = h^2 / (2 * sqrt((theta*r)^2 + sigma^2 r h^2)),

reducing to n(t) = sigma^2/(2 theta) * (1 - exp(-2 theta t)) when h = 0.  The
closed form has an elementary antiderivative, so penalty integrals stay exact
and vectorized; a fixed-step RK4 integration of the Riccati equation is kept
as an independent numerical oracle, and generic adaptive Simpson quadrature
backs the integral of any penalty without a closed antiderivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import DelayDistribution

__all__ = [
    "PenaltyError",
    "OuParams",
    "PenaltyBounds",
    "AssumptionReport",
    "AgePenalty",
    "Linear",
    "Power",
    "Floor",
    "OuMmse",
    "ou_mmse_closed",
    "ou_mmse_numeric",
    "adaptive_simpson",
    "penalty_bounds",
    "classify_assumption",
    "parse_penalty",
    "format_penalty",
]


class PenaltyError(ValueError):
    """Invalid penalty parameters, specification, or evaluation domain."""


@dataclass(frozen=True)
class OuParams:
    """Scalar OU-source / observation parameters.

    theta: mean-reversion rate (> 0), sigma: diffusion scale (> 0),
    h: observation gain (>= 0), r: observation noise intensity (> 0).
    """

    theta: float
    sigma: float
    h: float
    r: float

    def __post_init__(self):
        for name in ("theta", "sigma", "r"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise PenaltyError(f"OU parameter {name} must be > 0, got {v}")
        if not (math.isfinite(self.h) and self.h >= 0.0):
            raise PenaltyError(f"OU observation gain h must be >= 0, got {self.h}")

    @property
    def rate(self) -> float:
        """Exponential relaxation rate a = sqrt(theta^2 + sigma^2 h^2 / r)."""
        return math.sqrt(self.theta**2 + self.sigma**2 * self.h**2 / self.r)

    @property
    def steady_state(self) -> float:
        """Error-variance limit: nbar for h > 0, sigma^2/(2 theta) for h = 0."""
        if self.h == 0.0:
            return self.sigma**2 / (2.0 * self.theta)
        root = math.sqrt((self.theta * self.r) ** 2 + self.sigma**2 * self.r * self.h**2)
        return (-self.theta * self.r + root) / self.h**2

    @property
    def ell(self) -> float:
        if self.h == 0.0:
            return 0.0
        root = math.sqrt((self.theta * self.r) ** 2 + self.sigma**2 * self.r * self.h**2)
        return self.h**2 / (2.0 * root)


def ou_mmse_closed(delta, params: OuParams):
    """Estimation-error variance after age ``delta``, in closed form."""
    d = np.asarray(delta, dtype=float)
    if params.h == 0.0:
        out = params.steady_state * (-np.expm1(-2.0 * params.theta * d))
    else:
        nbar = params.steady_state
        ell = params.ell
        c = 1.0 / nbar - ell
        # Rearranged from nbar - e/(ell*e + c) with e = exp(-2 a t) so that the
        # value is exactly 0 at t = 0 and overflow-free for large t.
        e = np.exp(-2.0 * params.rate * d)
        out = -np.expm1(-2.0 * params.rate * d) * (1.0 - nbar * ell) / (ell * e + c)
    return float(out) if np.isscalar(delta) else out


def _ou_antiderivative(t, params: OuParams):
    """Exact antiderivative of ``ou_mmse_closed``; differences give integrals."""
    t = np.asarray(t, dtype=float)
    if params.h == 0.0:
        th2 = 2.0 * params.theta
        return params.steady_state * (t + np.exp(-th2 * t) / th2)
    nbar = params.steady_state
    ell = params.ell
    c = 1.0 / nbar - ell
    a2 = 2.0 * params.rate
    return nbar * t + np.log1p(ell * np.exp(-a2 * t) / c) / (a2 * ell)


def ou_mmse_numeric(delta, params: OuParams, step: float = 1e-3):
    """RK4 integration of the Riccati equation from age 0 to ``delta``.

    Accepts a scalar or an array of ages (one march over the sorted targets);
    serves as the independent oracle for :func:`ou_mmse_closed`.
    """
    if step <= 0.0:
        raise PenaltyError(f"step must be > 0, got {step}")
    targets = np.atleast_1d(np.asarray(delta, dtype=float))
    if np.any(targets < 0.0):
        raise PenaltyError("age must be >= 0")

    theta, sigma, h, r = params.theta, params.sigma, params.h, params.r
    qcoef = h * h / r

    def deriv(n):
        return -2.0 * theta * n + sigma * sigma - qcoef * n * n

    def rk4(n, dt):
        k1 = deriv(n)
        k2 = deriv(n + 0.5 * dt * k1)
        k3 = deriv(n + 0.5 * dt * k2)
        k4 = deriv(n + dt * k3)
        return n + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    order = np.argsort(targets, kind="stable")
    out = np.empty_like(targets)
    t, n = 0.0, 0.0
    for idx in order:
        target = targets[idx]
        remaining = target - t
        while remaining > step * (1.0 + 1e-12):
            n = rk4(n, step)
            t += step
            remaining = target - t
        if remaining > 0.0:
            n = rk4(n, remaining)
            t = target
        out[idx] = n
    return float(out[0]) if np.isscalar(delta) else out


def adaptive_simpson(fn, a: float, b: float, tol: float = 1e-9, max_depth: int = 30) -> float:
    """Adaptive Simpson quadrature of ``fn`` on [a, b].

    ``tol`` is absolute; a relative floor of 1e-12 of the whole-interval
    estimate keeps the recursion bounded on large-scale integrands.
    """
    if b <= a:
        return 0.0

    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lmid = 0.5 * (lo + mid)
        rmid = 0.5 * (mid + hi)
        flm, frm = fn(lmid), fn(rmid)
        left = simpson(lo, mid, flo, flm, fmid)
        right = simpson(mid, hi, fmid, frm, fhi)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return recurse(lo, mid, flo, flm, fmid, left, eps / 2.0, depth - 1) + recurse(
            mid, hi, fmid, frm, fhi, right, eps / 2.0, depth - 1
        )

    fa, fm, fb = fn(a), fn(0.5 * (a + b)), fn(b)
    whole = simpson(a, b, fa, fm, fb)
    eps = max(tol, abs(whole) * 1e-12)
    return recurse(a, b, fa, fm, fb, whole, eps, max_depth)


@dataclass(frozen=True)
class PenaltyBounds:
    """p(0) and the limit of p at infinity (may be ``inf``)."""

    p_lower: float
    p_upper: float

    def __post_init__(self):
        if self.p_lower > self.p_upper:
            raise PenaltyError("penalty bounds must satisfy p_lower <= p_upper")


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the sufficient-condition scan for the solver's contraction
    requirement.  ``unverified`` never means the requirement fails, only that
    no structural condition certified it."""

    satisfied: bool
    condition: str  # bounded | polynomial-with-moment | subexponential-bounded-delay | error-free | unverified
    detail: str


class AgePenalty:
    """Non-decreasing penalty of the age, finite on [0, inf)."""

    def eval(self, delta):
        """p(delta); vectorized, rejects negative ages."""
        arr = np.asarray(delta, dtype=float)
        if np.any(arr < 0.0):
            raise PenaltyError("age must be >= 0")
        out = self._eval(arr)
        return float(out) if np.isscalar(delta) else out

    def _eval(self, arr):
        raise NotImplementedError

    def _antiderivative(self, t):
        return None

    def integral(self, a, b):
        """Definite integral of p on [a, b] (elementwise for arrays).

        Uses the exact antiderivative when the family provides one, otherwise
        adaptive Simpson quadrature at absolute tolerance 1e-9.
        """
        lo = np.asarray(a, dtype=float)
        hi = np.asarray(b, dtype=float)
        if np.any(lo < 0.0) or np.any(hi < lo):
            raise PenaltyError("integral bounds must satisfy 0 <= a <= b")
        anti = self._antiderivative(hi)
        if anti is not None:
            out = anti - self._antiderivative(lo)
        else:
            flat_lo = np.broadcast_to(lo, np.broadcast_shapes(lo.shape, hi.shape)).ravel()
            flat_hi = np.broadcast_to(hi, flat_lo.shape).ravel()
            vals = [adaptive_simpson(lambda t: self._eval(np.asarray(t)), l, h) for l, h in zip(flat_lo, flat_hi)]
            out = np.array(vals).reshape(np.broadcast_shapes(lo.shape, hi.shape))
        if np.isscalar(a) and np.isscalar(b):
            return float(out)
        return out

    def bounds(self) -> PenaltyBounds:
        raise NotImplementedError

    def polynomial_degree(self):
        """Degree n when p(delta) = O(delta^n); None when not polynomial."""
        return None


@dataclass(frozen=True)
class Linear(AgePenalty):
    a: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0.0):
            raise PenaltyError(f"linear coefficient must be > 0, got {self.a}")

    def _eval(self, arr):
        return self.a * arr

    def _antiderivative(self, t):
        return 0.5 * self.a * t * t

    def bounds(self):
        return PenaltyBounds(0.0, math.inf)

    def polynomial_degree(self):
        return 1.0


@dataclass(frozen=True)
class Power(AgePenalty):
    a: float
    n: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0.0):
            raise PenaltyError(f"power coefficient must be > 0, got {self.a}")
        if not (math.isfinite(self.n) and self.n > 0.0):
            raise PenaltyError(f"power exponent must be > 0, got {self.n}")

    def _eval(self, arr):
        return self.a * arr**self.n

    def _antiderivative(self, t):
        return self.a * t ** (self.n + 1.0) / (self.n + 1.0)

    def bounds(self):
        return PenaltyBounds(0.0, math.inf)

    def polynomial_degree(self):
        return self.n


@dataclass(frozen=True)
class Floor(AgePenalty):
    """p(delta) = floor(a * delta); integral uses the exact staircase sum."""

    a: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0.0):
            raise PenaltyError(f"floor coefficient must be > 0, got {self.a}")

    def _eval(self, arr):
        return np.floor(self.a * arr)

    def _antiderivative(self, t):
        # integral of floor(u) du from 0 to u is k(k-1)/2 + k(u-k), k = floor(u)
        u = self.a * t
        k = np.floor(u)
        return (0.5 * k * (k - 1.0) + k * (u - k)) / self.a

    def bounds(self):
        return PenaltyBounds(0.0, math.inf)

    def polynomial_degree(self):
        return 1.0


@dataclass(frozen=True)
class OuMmse(AgePenalty):
    """Kalman-Bucy estimation-error penalty; bounded and increasing in age."""

    params: OuParams

    def _eval(self, arr):
        return ou_mmse_closed(arr, self.params)

    def _antiderivative(self, t):
        return _ou_antiderivative(t, self.params)

    def bounds(self):
        return PenaltyBounds(0.0, self.params.steady_state)


def penalty_bounds(p: AgePenalty) -> PenaltyBounds:
    return p.bounds()


def classify_assumption(p: AgePenalty, channel, zbar: float | None = None) -> AssumptionReport:
    """Scan the sufficient conditions under which the threshold solve is known
    to be the unique optimum.

    Checks, in order: error-free forward channel (no retries, so no condition
    is needed), bounded penalty, polynomial penalty with a finite (n+1)-th
    forward-delay moment, and sub-exponential penalty growth with bounded
    forward delay.  Reports ``unverified`` when none applies; it never claims
    the requirement fails.
    """
    forward: DelayDistribution = channel.forward
    note = ""
    if zbar is not None:
        note = f" (waiting cap zbar={zbar:g} supplied; check it with feasibility_zbar)"

    if channel.alpha == 0.0:
        return AssumptionReport(
            True, "error-free", "forward channel never fails, so every epoch has one attempt" + note
        )
    bounds = p.bounds()
    if math.isfinite(bounds.p_upper):
        return AssumptionReport(True, "bounded", f"penalty is bounded by {bounds.p_upper:g}" + note)
    degree = p.polynomial_degree()
    if degree is not None and forward.moment_finite(degree + 1.0):
        return AssumptionReport(
            True,
            "polynomial-with-moment",
            f"penalty grows like age^{degree:g} and the forward delay has a finite "
            f"{degree + 1:g}-th moment" + note,
        )
    if math.isfinite(forward.support_sup()):
        return AssumptionReport(
            True,
            "subexponential-bounded-delay",
            "forward delay is bounded and the penalty integral grows sub-exponentially" + note,
        )
    return AssumptionReport(
        False, "unverified", "no sufficient condition matched; the solve may still be valid" + note
    )


def parse_penalty(text: str) -> AgePenalty:
    """Parse ``linear:<a>``, ``power:<a>:<n>``, ``floor:<a>``, or
    ``ou:<theta>:<sigma>:<h>:<r>``."""
    parts = [s.strip() for s in text.strip().split(":")]
    kind = parts[0].lower()
    try:
        if kind == "linear" and len(parts) == 2:
            return Linear(float(parts[1]))
        if kind == "power" and len(parts) == 3:
            return Power(float(parts[1]), float(parts[2]))
        if kind == "floor" and len(parts) == 2:
            return Floor(float(parts[1]))
        if kind == "ou" and len(parts) == 5:
            return OuMmse(OuParams(*(float(v) for v in parts[1:])))
    except PenaltyError:
        raise
    except ValueError as exc:
        raise PenaltyError(f"cannot parse penalty spec {text!r}: {exc}") from None
    raise PenaltyError(f"unknown penalty spec {text!r}")


def format_penalty(p: AgePenalty) -> str:
    if isinstance(p, Linear):
        return f"linear:{p.a:g}"
    if isinstance(p, Power):
        return f"power:{p.a:g}:{p.n:g}"
    if isinstance(p, Floor):
        return f"floor:{p.a:g}"
    if isinstance(p, OuMmse):
        q = p.params
        return f"ou:{q.theta:g}:{q.sigma:g}:{q.h:g}:{q.r:g}"
    raise PenaltyError(f"cannot format {p!r}")
