"""
End-user response and satisfaction scoring.

Users are myopic: each period they pick the demand maximizing utility minus cost,
then report an integer satisfaction score.
"""

from __future__ import annotations

import math
import typing as t

from .domain import SatisfactionConfig, UserProfile

__all__ = (
    "UserStepResult",
    "deviation_index",
    "limit_index",
    "mean_score",
    "optimal_demand",
    "respond",
    "running_average_satisfaction",
    "satisfaction_level",
    "variation_index",
    "welfare",
)

_FLOOR_NUDGE = 1e-9


class UserStepResult(t.NamedTuple):
    demand: float
    welfare: float
    satisfaction: int
    indices: t.Tuple[float, float, int]


def optimal_demand(profile: UserProfile, price: float, t: int) -> float:
    """
    Welfare-maximizing demand at `price` in period `t`.

    The objective u_a*d^2 + u_b*d - price*d is concave, so the maximizer over the
    bounds is the stationary point clipped into [d_lo, d_hi].
    """
    d = (price - profile.u_b) / (2.0 * profile.u_a)
    return min(max(d, profile.d_lo[t]), profile.d_hi[t])


def welfare(profile: UserProfile, demand: float, price: float) -> float:
    """Utility minus electricity cost."""
    return profile.u_a * demand * demand + profile.u_b * demand - price * demand


def deviation_index(profile: UserProfile, demand: float, t: int) -> float:
    """Distance from the ideal demand, normalized by the farther bound."""
    ideal = profile.d_ideal[t]
    span = max(profile.d_hi[t] - ideal, ideal - profile.d_lo[t])
    if span <= 0:
        return 0.0
    return min(abs(demand - ideal) / span, 1.0)


def variation_index(profile: UserProfile, demand: float, prev_demand: float, t: int) -> float:
    """Change from the previous period's demand, normalized by the current bound width."""
    width = abs(profile.d_hi[t] - profile.d_lo[t])
    if width <= 0:
        return 0.0
    return min(abs(demand - prev_demand) / width, 1.0)


def limit_index(profile: UserProfile, demand: float, t: int) -> int:
    """1 when the demand sits within epsilon of either bound."""
    at_hi = abs(demand - profile.d_hi[t]) <= profile.epsilon
    at_lo = abs(demand - profile.d_lo[t]) <= profile.epsilon
    return int(at_hi or at_lo)


def satisfaction_level(cfg: SatisfactionConfig, i_dev: float, v_var: float, l_lim: int) -> int:
    """
    Floor-quantized satisfaction score in {0, ..., 10}.

    A 1e-9 nudge keeps exact integers such as 7.0 from flooring to 6.
    """
    c = 10.0 - cfg.omega1 * i_dev - cfg.omega2 * v_var - (10.0 - cfg.omega1 - cfg.omega2) * l_lim
    return int(min(10, max(0, math.floor(c + _FLOOR_NUDGE))))


def mean_score(total: float, t: int, n_users: int) -> float:
    """Running average from the score sum of the first `t` periods."""
    return total / (n_users * t)


def running_average_satisfaction(
    history: t.Sequence[t.Sequence[int]], t: int, n_users: int
) -> float:
    """
    Mean score over the first `t` periods and all users.

    :param history: Per-period score lists, oldest first.
    :param t: Number of elapsed periods (1-based).
    :param n_users: Number of users.
    """
    return mean_score(sum(sum(scores) for scores in history[:t]), t, n_users)


def respond(
    profile: UserProfile,
    cfg: SatisfactionConfig,
    price: float,
    prev_demand: float,
    t: int,
) -> UserStepResult:
    """Demand, welfare and satisfaction of one user for one period."""
    demand = optimal_demand(profile, price, t)
    i_dev = deviation_index(profile, demand, t)
    v_var = variation_index(profile, demand, prev_demand, t)
    l_lim = limit_index(profile, demand, t)
    return UserStepResult(
        demand=demand,
        welfare=welfare(profile, demand, price),
        satisfaction=satisfaction_level(cfg, i_dev, v_var, l_lim),
        indices=(i_dev, v_var, l_lim),
    )
