"""The estimation-error age penalty of a scalar OU source.

A destination tracks the source with a Kalman-Bucy filter that also sees a
noisy side observation (gain h, noise intensity r).  Between deliveries the
filter's error variance follows a Riccati equation in the age; the closed
form is bounded and increasing, so stale samples saturate instead of blowing
up.  This script prints the curve, checks it against a fixed-step RK4
integration of the same equation, and solves the sampling problem for it.
"""

import numpy as np

from aoi_sampling import (
    ChannelModel,
    Lognormal,
    McConfig,
    OuMmse,
    OuParams,
    SolverConfig,
    ou_mmse_closed,
    ou_mmse_numeric,
    penalty_bounds,
    solve_beta,
)

params = OuParams(theta=1.0, sigma=1.0, h=1.0, r=1.0)
print(f"steady-state error variance nbar = {params.steady_state:.6f}  (sqrt(2) - 1)")

ages = np.array([0.0, 0.1, 0.3, 1.0, 3.0, 10.0])
closed = ou_mmse_closed(ages, params)
numeric = ou_mmse_numeric(ages, params, step=1e-3)
print(f"{'age':>6} {'closed form':>12} {'RK4 oracle':>12} {'abs diff':>10}")
for a, c, n in zip(ages, closed, numeric):
    print(f"{a:6.1f} {c:12.8f} {n:12.8f} {abs(c - n):10.2e}")

# blind filter (h = 0): the variance relaxes to sigma^2 / (2 theta)
blind = OuParams(theta=0.5, sigma=1.0, h=0.0, r=1.0)
print(f"\nblind filter limit = {blind.steady_state:.3f}; n(1) = {ou_mmse_closed(1.0, blind):.6f} (1 - e^-1)")

# a bounded penalty caps the achievable average: beta stays below nbar
penalty = OuMmse(params)
channel = ChannelModel(0.3, Lognormal(1.0), Lognormal(0.8))
policy = solve_beta(channel, penalty, SolverConfig(mc=McConfig(samples=100_000, seed=4)))
print(f"\noptimal average penalty on a lossy lognormal channel: beta = {policy.beta:.6f}")
print(f"penalty upper bound: {penalty_bounds(penalty).p_upper:.6f}  (beta must stay below it)")
print(f"threshold b = {policy.b:.4f}")
