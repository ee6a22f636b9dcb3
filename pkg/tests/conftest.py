import typing as t

import numpy as np
import pytest

from drlab.domain import (
    BatterySpec,
    CalendarStamp,
    MarketSeries,
    PenaltyConfig,
    PricingRules,
    SatisfactionConfig,
    Scenario,
    UserProfile,
)


def flat_user(horizon: int, ideal: float = 10.0, u_a: float = -0.01) -> UserProfile:
    # unconstrained optimum sits at `ideal` for a retail price of 0.15
    return UserProfile(
        u_a=u_a,
        u_b=0.15 - 2 * u_a * ideal,
        d_lo=(0.6 * ideal,) * horizon,
        d_hi=(1.4 * ideal,) * horizon,
        d_ideal=(ideal,) * horizon,
    )


def build_scenario(
    horizon: int = 4,
    *,
    n_users: int = 1,
    t_his: int = 4,
    t_pre: int = 2,
    start: int = 0,
    battery: BatterySpec = BatterySpec(),
    pricing: PricingRules = PricingRules(),
    penalty: PenaltyConfig = PenaltyConfig(),
    users: t.Optional[t.Sequence[UserProfile]] = None,
    pv: t.Optional[t.Sequence[float]] = None,
    price: t.Optional[t.Sequence[float]] = None,
) -> Scenario:
    n = start + horizon + t_pre + 1
    pv = tuple(pv) if pv is not None else tuple(float(5 * k) for k in range(n))
    price = tuple(price) if price is not None else (0.1,) * n
    if users is None:
        users = [flat_user(horizon, ideal=8.0 + 2 * i) for i in range(n_users)]
    return Scenario(
        users=tuple(users),
        satisfaction=SatisfactionConfig(),
        battery=battery,
        pricing=pricing,
        penalty=penalty,
        market=MarketSeries(
            pv=pv,
            dso_price=price,
            calendar=tuple(CalendarStamp(hour=k % 24, week=2, month=0) for k in range(n)),
        ),
        horizon=horizon,
        t_his=t_his,
        t_pre=t_pre,
        start=start,
        sequence_len=t_his + t_pre,
    )


@pytest.fixture
def make_scenario():
    return build_scenario


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
