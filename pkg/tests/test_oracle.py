import itertools

import numpy as np
import pytest

from drlab import exceptions
from drlab.domain import BatterySpec, PenaltyConfig, PricingRules
from drlab.market_env import reset
from drlab.oracle import (
    GridSpec,
    certify,
    dp_key,
    dp_optimal,
    exhaustive_optimal,
    raw_grid,
    replay,
    return_ratio,
)
from drlab.td3_agent import ConstantPolicy, RandomPolicy, ReplayPolicy
from drlab.user_model import optimal_demand

NO_BATTERY = BatterySpec(p_min=0.0, p_max=0.0)
NO_CAPACITY = BatterySpec(capacity=0.0)


def test_raw_grid_order():
    assert raw_grid(GridSpec(2, 3)) == [
        (-1.0, -1.0), (-1.0, 0.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 0.0), (1.0, 1.0),
    ]  # fmt: skip
    with pytest.raises(ValueError):
        raw_grid(GridSpec(1, 3))


def test_single_period_matches_price_scan(make_scenario):
    s = make_scenario(horizon=1, battery=NO_BATTERY, penalty=PenaltyConfig(mode="off"))
    grid = GridSpec(n_price=7, n_batt=2)
    result = exhaustive_optimal(s, grid)

    user, dso, pv = s.users[0], s.market.dso_price[0], s.market.pv[0]
    lo, hi = s.pricing.k1 * dso, s.pricing.k2 * dso
    best = -np.inf
    for a1 in np.linspace(-1, 1, 7):
        price = 0.5 * (lo + hi) + a1 * 0.5 * (hi - lo)
        d = optimal_demand(user, price, 0)
        p_dso, p_neg = max(0.0, d - pv), max(0.0, pv - d)
        best = max(best, price * d - p_dso * dso - s.pricing.rho_res * p_neg)
    assert result.best_value == pytest.approx(best, abs=1e-12)
    assert len(result.best_actions) == 1


def test_single_period_exhaustive_equals_dp(make_scenario):
    s = make_scenario(horizon=1)
    grid = GridSpec(3, 3)
    ex, dp = exhaustive_optimal(s, grid), dp_optimal(s, grid)
    assert ex.best_value == dp.best_value
    assert ex.raw_actions == dp.raw_actions


def test_finer_grid_never_worse(make_scenario):
    s = make_scenario(horizon=2)
    coarse = exhaustive_optimal(s, GridSpec(3, 3))
    fine = exhaustive_optimal(s, GridSpec(5, 3))
    assert fine.best_value >= coarse.best_value


def test_best_actions_replay_exactly(make_scenario):
    s = make_scenario(horizon=3, n_users=2)
    for result in (exhaustive_optimal(s, GridSpec(3, 3)), dp_optimal(s, GridSpec(3, 3))):
        total, trace = replay(s, result.raw_actions)
        assert total == pytest.approx(result.best_value, abs=1e-9)
        assert [(o.price, o.battery) for o in trace] == result.best_actions
        assert len(result.trace) == 3


@pytest.mark.parametrize("horizon", [1, 2, 3])
def test_dp_equals_exhaustive_without_storage(make_scenario, horizon):
    s = make_scenario(horizon=horizon, battery=NO_CAPACITY)
    grid = GridSpec(3, 3)
    expected = exhaustive_optimal(s, grid).best_value
    assert dp_optimal(s, grid).best_value == pytest.approx(expected, abs=1e-9)


def test_dp_beats_every_constant_grid_policy(make_scenario):
    s = make_scenario(horizon=4, battery=NO_CAPACITY)
    grid = GridSpec(3, 3)
    best = dp_optimal(s, grid).best_value
    for a in raw_grid(grid):
        value, _ = replay(s, [a] * 4)
        assert value <= best + 1e-9


def test_dp_with_satisfaction_buckets(make_scenario):
    s = make_scenario(horizon=3, battery=NO_CAPACITY)
    grid = GridSpec(3, 3)
    exact = dp_optimal(s, grid)
    coarse = dp_optimal(s, grid, sat_levels=5)
    assert coarse.best_value <= exact.best_value + 1e-9
    total, _ = replay(s, coarse.raw_actions)
    assert total == pytest.approx(coarse.best_value, abs=1e-9)


def test_grid_horizon_overrides_scenario(make_scenario):
    s = make_scenario(horizon=4)
    result = dp_optimal(s, GridSpec(3, 3, horizon=2))
    assert len(result.raw_actions) == 2


def test_exhaustive_guard(make_scenario):
    with pytest.raises(exceptions.OracleGuardException):
        exhaustive_optimal(make_scenario(horizon=8), GridSpec(3, 3))


def test_dp_state_guard(make_scenario):
    with pytest.raises(exceptions.OracleGuardException):
        dp_optimal(make_scenario(horizon=2), GridSpec(3, 3), max_states=1)


def test_dp_horizon_guard(make_scenario):
    with pytest.raises(exceptions.OracleGuardException):
        dp_optimal(make_scenario(horizon=4), GridSpec(3, 3, horizon=25))


def test_certify_oracle_actions(make_scenario):
    s = make_scenario(horizon=3)
    grid = GridSpec(3, 3)
    oracle = dp_optimal(s, grid)
    result = certify(ReplayPolicy(oracle.raw_actions), s, grid, oracle=oracle)
    assert result.ratio == pytest.approx(1.0)
    assert result.agent_return == pytest.approx(oracle.best_value)
    assert len(result.agent_trace) == 3
    assert result.gap == pytest.approx(1.0)


def test_certify_computes_oracle_when_missing(make_scenario):
    s = make_scenario(horizon=4)
    grid = GridSpec(3, 3, horizon=2)
    result = certify(ConstantPolicy(0.0, 0.0), s, grid)
    assert len(result.agent_trace) == 2
    if result.oracle.best_value > 0:
        assert result.ratio == pytest.approx(result.agent_return / result.oracle.best_value)
    assert result.gap == pytest.approx(0.0)


def test_parallel_search_matches_serial(make_scenario):
    s = make_scenario(horizon=2)
    grid = GridSpec(3, 3)
    serial = exhaustive_optimal(s, grid)
    parallel = exhaustive_optimal(s, grid, workers=2)
    assert serial.best_value == parallel.best_value
    assert serial.raw_actions == parallel.raw_actions


def test_exhaustive_is_brute_force(make_scenario):
    s = make_scenario(horizon=2, n_users=2)
    grid = GridSpec(2, 2)
    best = max(replay(s, list(path))[0] for path in itertools.product(raw_grid(grid), repeat=2))
    assert exhaustive_optimal(s, grid).best_value == pytest.approx(best, abs=1e-12)


@pytest.mark.parametrize(
    "agent, best, expected",
    [(90.0, 100.0, 0.9), (110.0, 100.0, 1.1), (-110.0, -100.0, 0.9), (-90.0, -100.0, 1.1)],
)
def test_return_ratio_orders_like_returns(agent, best, expected):
    assert return_ratio(agent, best) == pytest.approx(expected)


def test_return_ratio_zero_oracle():
    assert np.isnan(return_ratio(1.0, 0.0))


def test_certify_ranks_policies_below_negative_oracle(make_scenario):
    # curtailment cost dominates every action, so every return is negative
    s = make_scenario(
        horizon=3, battery=NO_BATTERY, pricing=PricingRules(rho_res=1.0), pv=[100.0] * 6,
        penalty=PenaltyConfig(mode="off"),
    )  # fmt: skip
    grid = GridSpec(3, 2)
    oracle = dp_optimal(s, grid)
    assert oracle.best_value < 0

    best = certify(ReplayPolicy(oracle.raw_actions), s, grid, oracle=oracle)
    assert best.ratio == pytest.approx(1.0)
    for policy in (RandomPolicy(0), RandomPolicy(1), ConstantPolicy(-1.0, 0.0)):
        result = certify(policy, s, grid, oracle=oracle)
        assert result.agent_return <= oracle.best_value + 1e-9
        assert result.ratio <= best.ratio
        assert result.gap <= 1.0 + 1e-9


def test_dp_key_merges_round_off(make_scenario):
    state, _ = reset(make_scenario())
    levels = np.linspace(0.1, 0.9, 5)
    a = state._replace(lambda_prev=0.1 + 0.2, soc=0.52)
    b = state._replace(lambda_prev=0.3, soc=0.5)
    assert a.lambda_prev != b.lambda_prev
    assert dp_key(a, levels) == dp_key(b, levels)
    assert dp_key(state._replace(lambda_prev=0.31), levels) != dp_key(b, levels)

    ps = state.penalty_state
    c = state._replace(penalty_state=ps._replace(beta_lin=ps.beta_lin + 5.0 * (0.7 - 0.4)))
    d = state._replace(penalty_state=ps._replace(beta_lin=ps.beta_lin + 1.5))
    assert dp_key(c, levels) == dp_key(d, levels)
