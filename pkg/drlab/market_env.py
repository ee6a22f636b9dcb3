"""
The pricing environment: observation construction, action feasibility, battery
dynamics, grid settlement and reward assembly.

The functional core (`reset`, `step` and the pieces they compose) works on immutable
`EnvState` values; `MarketEnv` wraps it as a gymnasium environment.
"""

from __future__ import annotations

import logging
import math
import typing as t

import gymnasium as gym
import numpy as np
from gymnasium import spaces

from . import exceptions
from . import penalty as pen
from . import user_model as um
from .domain import BatterySpec, PricingRules, Scenario

__all__ = (
    "ActionRaw",
    "EnvState",
    "MarketEnv",
    "Observation",
    "StepOutcome",
    "battery_step",
    "build_observation",
    "encode_time",
    "feasible_price_interval",
    "map_action",
    "reset",
    "reward",
    "settle_power",
    "step",
    "trace_record",
)

logger = logging.getLogger(__name__)

_HOUR_DIV, _WEEK_DIV, _MONTH_DIV = 23, 51, 11
N_SCALARS = 8


class EnvState(t.NamedTuple):
    """
    Internal simulator state between periods.

    :param t: Current period index.
    :param soc: Battery state of charge (fraction).
    :param lambda_prev: Previous selling price (currency/kWh).
    :param d_prev: Previous demand per user (kW).
    :param sat_sum: Cumulative satisfaction score sum of the episode (points).
    :param penalty_state: Penalty coefficients.
    :param rng_seed: Seed the episode was reset with.
    """

    t: int
    soc: float
    lambda_prev: float
    d_prev: t.Tuple[float, ...]
    sat_sum: int
    penalty_state: pen.PenaltyState
    rng_seed: int


class Observation(t.NamedTuple):
    pv_window: np.ndarray
    dso_window: np.ndarray
    scalars: np.ndarray

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.pv_window, self.dso_window, self.scalars])


class ActionRaw(t.NamedTuple):
    a1: float
    a2: float


class StepOutcome(t.NamedTuple):
    """
    Everything that happened in one period.

    :param price: Applied selling price (currency/kWh).
    :param battery: Applied battery power, positive charges (kW).
    :param soc: State of charge after the period.
    :param demands: Demand per user (kW).
    :param scores: Satisfaction score per user.
    :param c_ave: Running average satisfaction after the period.
    :param p_dso: Power bought from the DSO (kW).
    :param p_neg: Unused renewable power (kW).
    :param beta_lin: Linear coefficient used for this period's penalty.
    :param beta_sqr: Squared coefficient used for this period's penalty.
    """

    t: int
    dso_price: float
    pv: float
    price: float
    battery: float
    soc: float
    demands: t.Tuple[float, ...]
    scores: t.Tuple[int, ...]
    c_ave: float
    p_dso: float
    p_neg: float
    beta_lin: float
    beta_sqr: float
    penalty: float
    reward: float
    done: bool


def encode_time(hour: int, week: int, month: int) -> t.Tuple[float, float, float, float, float, float]:
    """
    Sine/cosine pairs of hour, week and month.

    Divisors are 23, 51 and 11, so hour 23 aliases hour 0.

    :raises exceptions.CalendarRangeException: If a component is out of range
    """
    for name, value, upper in (("hour", hour, 23), ("week", week, 51), ("month", month, 11)):
        if not 0 <= value <= upper:
            raise exceptions.CalendarRangeException(component=name, value=value, upper=upper)
    h = 2 * math.pi * hour / _HOUR_DIV
    w = 2 * math.pi * week / _WEEK_DIV
    m = 2 * math.pi * month / _MONTH_DIV
    return (math.sin(h), math.cos(h), math.sin(w), math.cos(w), math.sin(m), math.cos(m))


def _window_indices(scenario: Scenario, t: int, pad_right: bool) -> np.ndarray:
    n = len(scenario.market.pv)
    first = scenario.start + t - scenario.t_his + 1
    last = scenario.start + t + scenario.t_pre
    if last >= n and not pad_right:
        raise exceptions.SeriesCoverageException(needed=last, available=n)
    # left edge repeats the earliest sample; right edge only for the terminal observation
    return np.clip(np.arange(first, last + 1), 0, n - 1)


def _c_ave(scenario: Scenario, state: EnvState) -> float:
    if state.t == 0:
        return float(scenario.penalty.c_bound)
    return um.mean_score(state.sat_sum, state.t, scenario.n_users)


def build_observation(scenario: Scenario, state: EnvState, *, pad_right: bool = False) -> Observation:
    """
    Windows of PV and DSO price around period `t`, plus the scalar features.

    :param pad_right: Repeat the last sample past the end of the series; used only for
        the observation that follows the final period.

    :raises exceptions.SeriesCoverageException: If the forecast window runs past the series
    """
    idx = _window_indices(scenario, state.t, pad_right)
    pv = np.asarray(scenario.market.pv, dtype=np.float64)[idx]
    dso = np.asarray(scenario.market.dso_price, dtype=np.float64)[idx]
    k = min(scenario.start + state.t, len(scenario.market.calendar) - 1)
    stamp = scenario.market.calendar[k]
    scalars = np.array(
        [_c_ave(scenario, state), state.soc, *encode_time(stamp.hour, stamp.week, stamp.month)],
        dtype=np.float64,
    )
    return Observation(pv_window=pv, dso_window=dso, scalars=scalars)


def feasible_price_interval(
    rules: PricingRules, dso_price: float, lambda_prev: t.Optional[float]
) -> t.Tuple[float, float]:
    """
    Hard price bounds intersected with the ramp around the previous price.

    Without a previous price the ramp is inactive. An empty intersection collapses to the
    hard-bounded point nearest the previous price.
    """
    lo, hi = rules.k1 * dso_price, rules.k2 * dso_price
    if lambda_prev is None:
        return lo, hi
    r_lo = max(lo, lambda_prev - rules.delta_lambda)
    r_hi = min(hi, lambda_prev + rules.delta_lambda)
    if r_lo > r_hi:
        v = min(max(lambda_prev, lo), hi)
        return v, v
    return r_lo, r_hi


def map_action(
    raw: ActionRaw, interval: t.Tuple[float, float], battery: BatterySpec, soc: float
) -> t.Tuple[float, float]:
    """
    Scale a raw action in [-1, 1]^2 to (price, battery power).

    Battery power is clipped so the state of charge cannot leave [soc_min, soc_max].
    """
    a1 = min(max(float(raw[0]), -1.0), 1.0)
    a2 = min(max(float(raw[1]), -1.0), 1.0)
    lo, hi = interval
    price = 0.5 * (lo + hi) + a1 * 0.5 * (hi - lo)

    p_raw = battery.p_min + 0.5 * (a2 + 1.0) * (battery.p_max - battery.p_min)
    charge_room = max(0.0, (battery.soc_max - soc) * battery.capacity / battery.eta_ch)
    discharge_room = max(0.0, (soc - battery.soc_min) * battery.capacity * battery.eta_dis)
    p_b = min(max(p_raw, -discharge_room), charge_room)
    return price, p_b


def battery_step(battery: BatterySpec, soc: float, p_b: float) -> float:
    """State of charge after one hour at power `p_b` (positive charges)."""
    if battery.capacity <= 0:
        return soc
    new = (
        soc
        + max(0.0, p_b) * battery.eta_ch / battery.capacity
        + min(0.0, p_b) / (battery.eta_dis * battery.capacity)
    )
    return min(max(new, battery.soc_min), battery.soc_max)


def settle_power(pv: float, demands: t.Sequence[float], p_b: float) -> t.Tuple[float, float]:
    """
    Split the net grid demand into DSO purchase and unused renewable power.

    Net demand is total demand plus battery charging minus PV.
    """
    net = sum(demands) + p_b - pv
    return max(0.0, net), max(0.0, -net)


def reward(
    price: float,
    demands: t.Sequence[float],
    p_dso: float,
    dso_price: float,
    p_b: float,
    p_neg: float,
    penalty_value: float,
    battery: BatterySpec,
    rules: PricingRules,
) -> float:
    return (
        price * sum(demands)
        - p_dso * dso_price
        - battery.alpha_b * p_b * p_b
        - rules.rho_res * p_neg
        - penalty_value
    )


def reset(
    scenario: Scenario, seed: int = 0, previous: t.Optional[EnvState] = None
) -> t.Tuple[EnvState, Observation]:
    """
    Start an episode.

    Penalty coefficients carry over from `previous` when the scenario persists them.
    """
    cfg = scenario.penalty
    if previous is not None and cfg.persist_across_episodes:
        penalty_state = previous.penalty_state
    else:
        penalty_state = pen.initial_state(cfg)

    dso0 = scenario.market.dso_price[scenario.start]
    lo, hi = scenario.pricing.k1 * dso0, scenario.pricing.k2 * dso0
    state = EnvState(
        t=0,
        soc=scenario.battery.soc0,
        lambda_prev=min(max(dso0, lo), hi),
        d_prev=tuple(u.d_ideal[0] for u in scenario.users),
        sat_sum=0,
        penalty_state=penalty_state,
        rng_seed=seed,
    )
    return state, build_observation(scenario, state)


def step(
    scenario: Scenario, state: EnvState, raw: t.Sequence[float]
) -> t.Tuple[StepOutcome, EnvState, Observation]:
    """
    Advance one period.

    Order: price interval, action mapping, user responses, satisfaction, running average,
    penalty at the current coefficients, coefficient update, battery, settlement, reward.

    :raises exceptions.EpisodeFinishedException: If the episode is already over
    """
    if state.t >= scenario.horizon:
        raise exceptions.EpisodeFinishedException(t=state.t, horizon=scenario.horizon)

    k = scenario.start + state.t
    dso_price = scenario.market.dso_price[k]
    pv = scenario.market.pv[k]

    interval = feasible_price_interval(
        scenario.pricing, dso_price, state.lambda_prev if state.t > 0 else None
    )
    price, p_b = map_action(ActionRaw(raw[0], raw[1]), interval, scenario.battery, state.soc)

    responses = [
        um.respond(u, scenario.satisfaction, price, d_prev, state.t)
        for u, d_prev in zip(scenario.users, state.d_prev)
    ]
    demands = tuple(r.demand for r in responses)
    scores = tuple(r.satisfaction for r in responses)

    sat_sum = state.sat_sum + sum(scores)
    c_ave = um.mean_score(sat_sum, state.t + 1, scenario.n_users)

    used = state.penalty_state
    penalty_value, penalty_state = pen.step_penalty(used, c_ave)

    soc = battery_step(scenario.battery, state.soc, p_b)
    p_dso, p_neg = settle_power(pv, demands, p_b)
    r = reward(
        price, demands, p_dso, dso_price, p_b, p_neg, penalty_value, scenario.battery, scenario.pricing
    )

    done = state.t + 1 == scenario.horizon
    outcome = StepOutcome(
        t=state.t,
        dso_price=dso_price,
        pv=pv,
        price=price,
        battery=p_b,
        soc=soc,
        demands=demands,
        scores=scores,
        c_ave=c_ave,
        p_dso=p_dso,
        p_neg=p_neg,
        beta_lin=used.beta_lin,
        beta_sqr=used.beta_sqr,
        penalty=penalty_value,
        reward=r,
        done=done,
    )
    new_state = state._replace(
        t=state.t + 1,
        soc=soc,
        lambda_prev=price,
        d_prev=demands,
        sat_sum=sat_sum,
        penalty_state=penalty_state,
    )
    return outcome, new_state, build_observation(scenario, new_state, pad_right=done)


def trace_record(outcome: StepOutcome) -> t.Dict[str, t.Any]:
    """Flat row for tabular traces; per-user columns are suffixed with the user index."""
    row: t.Dict[str, t.Any] = {
        "t": outcome.t,
        "dso_price": outcome.dso_price,
        "pv": outcome.pv,
        "price": outcome.price,
        "p_b": outcome.battery,
        "soc": outcome.soc,
    }
    for i, d in enumerate(outcome.demands):
        row[f"demand_{i}"] = d
    for i, c in enumerate(outcome.scores):
        row[f"score_{i}"] = c
    row.update(
        c_ave=outcome.c_ave,
        p_dso=outcome.p_dso,
        p_neg=outcome.p_neg,
        beta_lin=outcome.beta_lin,
        beta_sqr=outcome.beta_sqr,
        penalty=outcome.penalty,
        reward=outcome.reward,
    )
    return row


class MarketEnv(gym.Env):
    """
    Gymnasium view of the pricing environment.

    Observations are the flattened `Observation` vector; actions are raw values in [-1, 1]^2.
    Penalty coefficients survive `reset` when the scenario persists them.
    """

    metadata = {"render_modes": []}

    def __init__(self, scenario: Scenario) -> None:
        self.scenario = scenario
        self.observation_space = spaces.Box(
            low=-np.inf, high=np.inf, shape=(scenario.obs_dim,), dtype=np.float64
        )
        self.action_space = spaces.Box(low=-1.0, high=1.0, shape=(2,), dtype=np.float64)
        self.state: t.Optional[EnvState] = None

    def reset(self, *, seed: t.Optional[int] = None, options: t.Optional[dict] = None):
        super().reset(seed=seed)
        self.state, obs = reset(self.scenario, seed or 0, previous=self.state)
        logger.debug(
            "reset seed=%s beta_lin=%.4g beta_sqr=%.4g",
            seed,
            self.state.penalty_state.beta_lin,
            self.state.penalty_state.beta_sqr,
        )
        return obs.flatten(), {}

    def step(self, action):
        if self.state is None:
            raise RuntimeError("Call reset before step.")
        outcome, self.state, obs = step(self.scenario, self.state, action)
        info = {"outcome": outcome, "record": trace_record(outcome)}
        return obs.flatten(), outcome.reward, outcome.done, False, info
