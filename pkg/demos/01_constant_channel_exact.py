"""Constant channels admit pencil-and-paper answers; use them to sanity-check
the whole stack.

With a unit forward delay, no backward delay, and no losses, the age traces a
sawtooth between 1 and 2, so the long-run average of p(age) = age is
(integral of t from 1 to 2) / 1 = 1.5, the threshold solve must land on
beta = 1.5 with b = 0.5, and the rule never actually waits (the age is
already 1 at every decision point).

Adding losses (alpha = 0.5) and a backward delay of 0.5 keeps zero-wait
optimal (constant delays always do), and the geometric series gives the
average exactly: with E[M] = 2 and E[M^2] = 6 the ratio works out to 3.25.
"""

from aoi_sampling import (
    ChannelModel,
    Constant,
    Linear,
    McConfig,
    SolverConfig,
    ZeroWait,
    exact_zero_wait_average,
    run,
    solve_beta,
    zero_wait_optimal,
)

penalty = Linear(1.0)

print("== error-free unit channel ==")
channel = ChannelModel(0.0, Constant(1.0), Constant(0.0))
cfg = SolverConfig(mc=McConfig(samples=5_000, seed=1))
policy = solve_beta(channel, penalty, cfg)
print(f"solved beta = {policy.beta:.6f}   (sawtooth arithmetic: 1.5)")
print(f"threshold b = {policy.b:.6f}   (solve c + 1 = 1.5 for c)")
print(f"wait at the recurrent state (age 1, ack 0): {policy.waiting_time(1.0, 0.0)}")
sim = run(ZeroWait(), channel, penalty, 10_000, seed=1)
print(f"simulated zero-wait average = {sim.avg_penalty}   (exact, no noise)")

print()
print("== unreliable channel, backward delay 0.5, alpha 0.5 ==")
channel = ChannelModel(0.5, Constant(1.0), Constant(0.5))
cfg = SolverConfig(mc=McConfig(samples=400_000, seed=2))
policy = solve_beta(channel, penalty, cfg)
exact = exact_zero_wait_average(channel, penalty)
print(f"solved beta  = {policy.beta:.5f} +/- {policy.beta_std_err:.5f}")
print(f"series oracle = {exact:.10f}   (9.75 / 3 = 3.25)")
verdict = zero_wait_optimal(channel, penalty, cfg)
print(f"zero-wait optimal: {verdict.optimal} (margin {verdict.margin:.4f})")
