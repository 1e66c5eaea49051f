"""Epoch-model oracles: Wald's identity, geometric-series expectations, exact
per-draw arithmetic, and the common-random-numbers monotonicity that the
solver's bisections rely on."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoi_sampling.distributions import (
    Constant,
    DiscreteEmpirical,
    Exponential,
    Lognormal,
    RandomSource,
)
from aoi_sampling.epoch_model import (
    ChannelModel,
    EpochDraw,
    McConfig,
    ModelError,
    draw_epoch,
    draw_epoch_pool,
    epoch_cost,
    exact_residual_atoms,
    exact_zero_wait_average,
    expected_penalty_at,
    residual_sum,
)
from aoi_sampling.penalty import Linear

UNRELIABLE_CONSTANT = ChannelModel(0.5, Constant(1.0), Constant(0.5))


def test_error_free_epochs_have_single_stage():
    channel = ChannelModel(0.0, Lognormal(1.0), Exponential(0.5))
    rng = RandomSource(0).generator()
    for _ in range(100):
        e = draw_epoch(channel, rng)
        assert e.m == 1 and e.xs == [] and len(e.ys) == 1


def test_residual_sum_arithmetic():
    assert residual_sum(EpochDraw(0.3, 0.1, 1, [], [1.0])) == 1.0
    e = EpochDraw(0.3, 0.1, 3, [0.5, 0.5], [1.0, 2.0, 3.0])
    assert residual_sum(e) == pytest.approx(7.0)
    e = EpochDraw(0.3, 0.1, 2, [0.0], [1.0, 1.0])
    assert residual_sum(e) == pytest.approx(2.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=6), st.data())
def test_residual_sum_matches_direct_formula(ys, data):
    xs = data.draw(st.lists(st.floats(0.0, 10.0), min_size=len(ys) - 1, max_size=len(ys) - 1))
    e = EpochDraw(0.0, 0.0, len(ys), xs, ys)
    expected = ys[0] + sum(x + y for x, y in zip(xs, ys[1:]))
    assert residual_sum(e) == pytest.approx(expected)


def test_epoch_draw_validation():
    with pytest.raises(ModelError):
        EpochDraw(0.0, 0.0, 2, [], [1.0, 1.0])
    with pytest.raises(ModelError):
        EpochDraw(0.0, 0.0, 0, [], [])


def test_channel_validation():
    with pytest.raises(ModelError):
        ChannelModel(1.0, Constant(1.0), Constant(0.0))
    with pytest.raises(ModelError):
        ChannelModel(0.5, Constant(0.0), Constant(0.5))
    # zero backward delay is legitimate
    ChannelModel(0.5, Constant(1.0), Constant(0.0))


def test_mean_residual_geometric_series():
    # E[Y'] = y + (E[M]-1)(x+y) = 1 + 1*1.5 = 2.5
    pool = draw_epoch_pool(UNRELIABLE_CONSTANT, 1_000_000, RandomSource(1).generator())
    se = float(np.std(pool.yprime, ddof=1) / math.sqrt(pool.n))
    assert abs(float(np.mean(pool.yprime)) - 2.5) <= 3 * se


def test_wald_identity_on_random_channels():
    rng = np.random.default_rng(99)
    families = [
        lambda: Constant(float(rng.uniform(0.2, 2.0))),
        lambda: Exponential(float(rng.uniform(0.2, 2.0))),
        lambda: Lognormal(float(rng.uniform(0.3, 1.5))),
        lambda: DiscreteEmpirical(((0.5, 0.4), (float(rng.uniform(1.0, 3.0)), 0.6))),
    ]
    for k in range(10):
        channel = ChannelModel(
            float(rng.uniform(0.0, 0.85)),
            families[k % len(families)](),
            families[(k + 1) % len(families)](),
        )
        pool = draw_epoch_pool(channel, 200_000, RandomSource(k).generator())
        total = pool.total_delay
        expected = (channel.forward.mean() + channel.backward.mean()) / (1.0 - channel.alpha)
        se = float(np.std(total, ddof=1) / math.sqrt(pool.n))
        assert abs(float(np.mean(total)) - expected) <= 4 * se


def test_pool_is_deterministic_and_independent_of_stage_retention():
    ch = ChannelModel(0.6, Lognormal(1.0), Exponential(0.4))
    a = draw_epoch_pool(ch, 10_000, RandomSource(5).generator())
    b = draw_epoch_pool(ch, 10_000, RandomSource(5).generator(), keep_stage_arrays=True)
    for name in ("y_prev", "x1", "m", "y1", "x2", "rest", "y_last"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    # retained stage arrays reassemble the aggregated columns
    rest = np.add.reduceat(
        np.concatenate([b.stage_xs + b.stage_ys, [0.0]]),
        np.minimum(b.offsets[:-1], len(b.stage_xs)),
    ) * (np.diff(b.offsets) > 0)
    assert np.allclose(rest, b.rest)


def test_expected_penalty_examples():
    est = expected_penalty_at(0.0, ChannelModel(0.0, Constant(1.0), Constant(0.0)), Linear(1.0), McConfig(1000, 0))
    assert est.value == 1.0 and est.std_err == 0.0
    est = expected_penalty_at(0.25, ChannelModel(0.0, Constant(1.0), Constant(0.0)), Linear(2.0), McConfig(1000, 0))
    assert est.value == pytest.approx(2.5, abs=1e-12)
    est = expected_penalty_at(0.0, UNRELIABLE_CONSTANT, Linear(1.0), McConfig(1_000_000, 3))
    assert abs(est.value - 2.5) <= 3 * est.std_err


def test_expected_penalty_monotone_under_common_random_numbers():
    mc = McConfig(50_000, seed=21)
    channel = ChannelModel(0.6, Lognormal(1.2), Exponential(0.5))
    values = [expected_penalty_at(c, channel, Linear(2.0), mc).value for c in np.linspace(0.0, 4.0, 17)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_epoch_cost_examples():
    e = EpochDraw(1.0, 0.0, 1, [], [1.0])
    assert epoch_cost(e, 0.0, Linear(1.0), 1.5) == pytest.approx(0.0, abs=1e-12)
    assert epoch_cost(e, 0.0, Linear(1.0), 0.0) == pytest.approx(1.5, abs=1e-12)
    assert epoch_cost(e, 1.0, Linear(1.0), 1.5) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ModelError):
        epoch_cost(e, -0.5, Linear(1.0), 1.5)


def test_epoch_cost_convex_in_waiting_time():
    rng = np.random.default_rng(13)
    p = Linear(2.0)
    for _ in range(50):
        m = int(rng.integers(1, 4))
        e = EpochDraw(
            float(rng.uniform(0, 3)),
            float(rng.uniform(0, 2)),
            m,
            list(rng.uniform(0, 2, m - 1)),
            list(rng.uniform(0.1, 3, m)),
        )
        beta = float(rng.uniform(0, 5))
        z1, z2 = sorted(rng.uniform(0, 5, 2))
        mid = 0.5 * (z1 + z2)
        lhs = epoch_cost(e, mid, p, beta)
        rhs = 0.5 * (epoch_cost(e, z1, p, beta) + epoch_cost(e, z2, p, beta))
        assert lhs <= rhs + 1e-9


def test_exact_residual_atoms_constant_channel():
    atoms = exact_residual_atoms(UNRELIABLE_CONSTANT)
    total = sum(p for _, p in atoms)
    assert total == pytest.approx(1.0, abs=1e-9)
    # values follow y + (m-1)(x+y); weights follow the geometric pmf
    assert atoms[0] == (1.0, pytest.approx(0.5))
    assert atoms[1] == (2.5, pytest.approx(0.25))
    mean_exact = sum(v * p for v, p in atoms)
    assert mean_exact == pytest.approx(2.5, abs=1e-9)


def test_exact_zero_wait_average_is_series_oracle():
    assert exact_zero_wait_average(UNRELIABLE_CONSTANT, Linear(1.0)) == pytest.approx(3.25, abs=1e-9)
    # error-free sawtooth: integral 1..2 of t dt over unit epoch
    exact = exact_zero_wait_average(ChannelModel(0.0, Constant(1.0), Constant(0.0)), Linear(1.0))
    assert exact == pytest.approx(1.5, abs=1e-12)


def test_exact_path_rejects_continuous_delays():
    with pytest.raises(ModelError):
        exact_residual_atoms(ChannelModel(0.5, Lognormal(1.0), Constant(0.5)))


def test_mc_config_validation():
    with pytest.raises(ModelError):
        McConfig(0)
