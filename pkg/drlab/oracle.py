"""
Optimal-value references on a discretized action grid: exhaustive enumeration for very
short horizons and a forward dynamic program for longer ones.

Both search raw actions on the grid `linspace(-1, 1, n)` per component, mapped through the
environment's own action mapping, so the price grid always lies on the feasible interval
of the step and every candidate runs through the true environment.
"""

from __future__ import annotations

import logging
import math
import typing as t
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import exceptions
from . import market_env as env
from .domain import Scenario
from .td3_agent import ConstantPolicy, Policy, ReplayPolicy, evaluate

__all__ = (
    "CertifyResult",
    "GridSpec",
    "OracleResult",
    "certify",
    "dp_key",
    "dp_optimal",
    "exhaustive_optimal",
    "raw_grid",
    "replay",
    "return_ratio",
)

logger = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 10**7
# lattice spacing for continuous state components in the dp key
TICK = 1e-9
RawAction = t.Tuple[float, float]


class GridSpec(t.NamedTuple):
    """
    Discretization of the action space.

    :param n_price: Price grid points per feasible interval.
    :param n_batt: Battery power grid points.
    :param horizon: Periods to optimize; the scenario horizon when unset.
    """

    n_price: int = 3
    n_batt: int = 3
    horizon: t.Optional[int] = None


class OracleResult(t.NamedTuple):
    best_value: float
    best_actions: t.List[t.Tuple[float, float]]
    raw_actions: t.List[RawAction]
    trace: t.List[env.StepOutcome]


class CertifyResult(t.NamedTuple):
    """
    :param ratio: Sign-aware return ratio, see `return_ratio`.
    :param gap: Share of the midpoint-to-oracle gap the agent closes (1 at the oracle, 0 at the midpoint policy).
    :param agent_return: Noise-free return of the certified policy.
    :param baseline_return: Return of the constant midpoint-price, idle-battery policy.
    """

    ratio: float
    gap: float
    agent_return: float
    baseline_return: float
    oracle: OracleResult
    agent_trace: t.List[t.Dict[str, t.Any]]


def raw_grid(grid: GridSpec) -> t.List[RawAction]:
    """Grid actions in lexicographic order."""
    if grid.n_price < 2 or grid.n_batt < 2:
        raise ValueError("Grid needs at least two points per component")
    return [
        (float(a1), float(a2))
        for a1 in np.linspace(-1.0, 1.0, grid.n_price)
        for a2 in np.linspace(-1.0, 1.0, grid.n_batt)
    ]


def _episode(scenario: Scenario, grid: GridSpec) -> Scenario:
    if grid.horizon is not None:
        scenario = scenario._replace(horizon=grid.horizon)
    # coefficients restart every episode so a path's penalty depends on that path only
    return scenario._replace(penalty=scenario.penalty._replace(persist_across_episodes=False))


def replay(scenario: Scenario, raw_actions: t.Sequence[RawAction]) -> t.Tuple[float, t.List[env.StepOutcome]]:
    """Total reward and outcomes of a raw action sequence from a fresh reset."""
    state, _ = env.reset(scenario)
    total, trace = 0.0, []
    for a in raw_actions:
        outcome, state, _ = env.step(scenario, state, a)
        total += outcome.reward
        trace.append(outcome)
    return total, trace


def _result(scenario: Scenario, value: float, path: t.Sequence[RawAction]) -> OracleResult:
    replayed, trace = replay(scenario, path)
    if replayed != value:
        logger.warning("replayed value %.12g differs from search value %.12g", replayed, value)
    return OracleResult(
        best_value=value,
        best_actions=[(o.price, o.battery) for o in trace],
        raw_actions=list(path),
        trace=trace,
    )


def _search(
    scenario: Scenario, actions: t.Sequence[RawAction], state: env.EnvState, value: float, path: t.List[RawAction]
) -> t.Tuple[float, t.List[RawAction]]:
    if state.t == scenario.horizon:
        return value, list(path)
    best_value, best_path = -math.inf, []
    for a in actions:
        outcome, nxt, _ = env.step(scenario, state, a)
        path.append(a)
        v, p = _search(scenario, actions, nxt, value + outcome.reward, path)
        path.pop()
        # strict improvement keeps the lexicographically smallest sequence among ties
        if v > best_value:
            best_value, best_path = v, p
    return best_value, best_path


def _search_branch(args: t.Tuple[Scenario, t.List[RawAction], RawAction]) -> t.Tuple[float, t.List[RawAction]]:
    scenario, actions, root = args
    state, _ = env.reset(scenario)
    outcome, nxt, _ = env.step(scenario, state, root)
    return _search(scenario, actions, nxt, outcome.reward, [root])


def exhaustive_optimal(scenario: Scenario, grid: GridSpec, *, workers: int = 1) -> OracleResult:
    """
    Best total reward over every grid action sequence.

    :param workers: Processes searching the root branches; 1 searches in-process.

    :raises exceptions.OracleGuardException: If the number of sequences exceeds 10^7
    """
    scenario = _episode(scenario, grid)
    actions = raw_grid(grid)
    size = float(len(actions)) ** scenario.horizon
    if size > EXHAUSTIVE_LIMIT:
        raise exceptions.OracleGuardException(what="action sequences", size=size, limit=EXHAUSTIVE_LIMIT)
    logger.debug("exhaustive search over %d sequences", int(size))

    jobs = [(scenario, actions, a) for a in actions]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            branches = list(pool.map(_search_branch, jobs))
    else:
        branches = [_search_branch(j) for j in jobs]

    best_value, best_path = -math.inf, []
    for v, p in branches:
        if v > best_value:
            best_value, best_path = v, p
    return _result(scenario, best_value, best_path)


class _Node(t.NamedTuple):
    value: float
    path: t.Tuple[RawAction, ...]
    state: env.EnvState


def _better(value: float, path: t.Tuple[RawAction, ...], node: t.Optional[_Node]) -> bool:
    if node is None or value > node.value:
        return True
    return value == node.value and path < node.path


DPKey = t.Tuple[int, int, int, int, int]


def _tick(value: float) -> int:
    return int(round(value / TICK))


def dp_key(
    state: env.EnvState, levels: np.ndarray, sat_levels: t.Optional[int] = None, sat_max: int = 1
) -> DPKey:
    """
    Dynamic-program bucket of a state: nearest soc level, the previous price and both penalty
    coefficients as indices on a `TICK` lattice, and the (optionally bucketed) satisfaction sum.
    """
    soc_bucket = int(np.argmin(np.abs(levels - state.soc)))
    sat = state.sat_sum
    if sat_levels is not None:
        sat = int(round(sat / sat_max * (sat_levels - 1)))
    ps = state.penalty_state
    return (soc_bucket, _tick(state.lambda_prev), sat, _tick(ps.beta_lin), _tick(ps.beta_sqr))


def dp_optimal(
    scenario: Scenario,
    grid: GridSpec,
    soc_levels: int = 21,
    sat_levels: t.Optional[int] = None,
    *,
    max_states: int = 10**6,
) -> OracleResult:
    """
    Forward dynamic program over (soc bucket, previous price, satisfaction sum, penalty
    coefficients).

    Soc is rounded to the nearest of `soc_levels` evenly spaced levels on [soc_min, soc_max];
    each bucket keeps the exact state of its best path, so the returned value is always
    achieved by replaying the returned actions. The satisfaction sum is exact unless
    `sat_levels` buckets it.

    :raises exceptions.OracleGuardException: If a layer holds more than `max_states` states
    """
    scenario = _episode(scenario, grid)
    if scenario.horizon > 24:
        raise exceptions.OracleGuardException(what="horizon", size=scenario.horizon, limit=24)
    actions = raw_grid(grid)
    b = scenario.battery
    levels = np.linspace(b.soc_min, b.soc_max, max(2, soc_levels))
    sat_max = 10 * scenario.n_users * scenario.horizon

    def key(state: env.EnvState) -> DPKey:
        return dp_key(state, levels, sat_levels, sat_max)

    state0, _ = env.reset(scenario)
    layer: t.Dict[DPKey, _Node] = {key(state0): _Node(0.0, (), state0)}
    for k in range(scenario.horizon):
        nxt: t.Dict[DPKey, _Node] = {}
        for node in layer.values():
            for a in actions:
                outcome, st, _ = env.step(scenario, node.state, a)
                value, path = node.value + outcome.reward, node.path + (a,)
                kk = key(st)
                if _better(value, path, nxt.get(kk)):
                    nxt[kk] = _Node(value, path, st)
        if len(nxt) > max_states:
            raise exceptions.OracleGuardException(what="dp states", size=len(nxt), limit=max_states)
        logger.debug("dp layer %d holds %d states", k + 1, len(nxt))
        layer = nxt

    best: t.Optional[_Node] = None
    for node in layer.values():
        if _better(node.value, node.path, best):
            best = node
    assert best is not None
    return _result(scenario, best.value, list(best.path))


def return_ratio(agent_return: float, best_value: float) -> float:
    """
    Agent return relative to the oracle's best, ordered like the returns themselves.

    This is `agent_return / best_value` for a positive best and `1 + (agent_return - best_value) / |best_value|`
    in general, so a worse return always gives a smaller ratio. NaN when the best value is zero.
    """
    if best_value == 0:
        return math.nan
    return 1.0 + (agent_return - best_value) / abs(best_value)


def certify(
    policy: Policy,
    scenario: Scenario,
    grid: GridSpec,
    *,
    oracle: t.Optional[OracleResult] = None,
    soc_levels: int = 21,
) -> CertifyResult:
    """
    Compare the policy's noise-free return with the oracle's best value on the same episode.

    The ratio is not clamped; a continuous policy may beat the grid optimum.
    """
    episode = _episode(scenario, grid)
    if oracle is None:
        oracle = dp_optimal(scenario, grid, soc_levels)
    if isinstance(policy, ReplayPolicy):
        policy.rewind()
    result = evaluate(policy, episode)
    baseline = evaluate(ConstantPolicy(0.0, 0.0), episode).mean_return
    ratio = return_ratio(result.mean_return, oracle.best_value)
    span = oracle.best_value - baseline
    gap = (result.mean_return - baseline) / span if span != 0 else math.nan
    logger.info(
        "agent return %.4f, oracle value %.4f, midpoint return %.4f, ratio %.4f, gap %.4f",
        result.mean_return, oracle.best_value, baseline, ratio, gap,
    )  # fmt: skip
    return CertifyResult(
        ratio=ratio,
        gap=gap,
        agent_return=result.mean_return,
        baseline_return=baseline,
        oracle=oracle,
        agent_trace=result.traces[0],
    )
