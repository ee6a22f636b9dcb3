"""
Configuration types shared by the simulator, the agent and the oracle.

Every type is an immutable NamedTuple. Field units are documented in the class
docstrings; `drlab schema` renders them.
"""

from __future__ import annotations

import math
import typing as t

from . import exceptions

__all__ = (
    "BatterySpec",
    "CalendarStamp",
    "MarketSeries",
    "PenaltyConfig",
    "PricingRules",
    "SatisfactionConfig",
    "Scenario",
    "UserProfile",
    "Violation",
    "default_users",
    "require_valid",
    "validate_scenario",
)

PenaltyMode = t.Literal["dynamic", "linear", "squared", "off"]

DEFAULT_SEQUENCE_LEN = 32

# (u_a, u_b) per default user; every optimum stays positive below 0.3 currency/kWh
DEFAULT_UTILITIES = ((-0.01, 0.3), (-0.008, 0.4), (-0.006, 0.45))


class UserProfile(t.NamedTuple):
    """
    An end-user with a concave quadratic utility and per-period demand bounds.

    :param u_a: Utility curvature, negative (currency/kW^2).
    :param u_b: Utility slope, positive (currency/kW).
    :param d_lo: Lower demand bound per episode period (kW).
    :param d_hi: Upper demand bound per episode period (kW).
    :param d_ideal: Ideal demand per episode period (kW).
    :param epsilon: Tolerance for counting a demand as sitting at a limit (kW).
    """

    u_a: float
    u_b: float
    d_lo: t.Tuple[float, ...]
    d_hi: t.Tuple[float, ...]
    d_ideal: t.Tuple[float, ...]
    epsilon: float = 0.05


class SatisfactionConfig(t.NamedTuple):
    """
    Weights of the satisfaction score; the limit index gets the remaining 10 - omega1 - omega2.

    :param omega1: Weight of the deviation-from-ideal index (score points).
    :param omega2: Weight of the consumption-variation index (score points).
    """

    omega1: float = 4.0
    omega2: float = 3.0


class BatterySpec(t.NamedTuple):
    """
    Battery energy storage owned by the provider. Positive power charges.

    :param p_min: Largest discharge power, as a nonpositive number (kW).
    :param p_max: Largest charge power (kW).
    :param soc_min: Lowest state of charge (fraction of capacity).
    :param soc_max: Highest state of charge (fraction of capacity).
    :param eta_ch: Charge efficiency, in (0, 1].
    :param eta_dis: Discharge efficiency, in (0, 1].
    :param capacity: Energy capacity (kWh).
    :param alpha_b: Quadratic utilization cost coefficient (currency/kW^2).
    :param soc0: State of charge at episode start (fraction of capacity).
    """

    p_min: float = -20.0
    p_max: float = 20.0
    soc_min: float = 0.1
    soc_max: float = 0.9
    eta_ch: float = 0.95
    eta_dis: float = 0.95
    capacity: float = 100.0
    alpha_b: float = 0.01
    soc0: float = 0.5


class PricingRules(t.NamedTuple):
    """
    Bounds on the retail price relative to the upstream price.

    :param k1: Lower multiplier on the DSO price (dimensionless).
    :param k2: Upper multiplier on the DSO price (dimensionless).
    :param delta_lambda: Largest price change between consecutive periods (currency/kWh).
    :param rho_res: Penalty price for unused renewable energy (currency/kWh).
    """

    k1: float = 1.0
    k2: float = 2.0
    delta_lambda: float = 0.05
    rho_res: float = 0.1


class PenaltyConfig(t.NamedTuple):
    """
    Satisfaction penalty shaping the reward.

    :param c_bound: Satisfaction threshold (score points, 0..10).
    :param beta_lin0: Initial linear coefficient.
    :param beta_sqr0: Initial squared coefficient.
    :param eta_lin: Ascent step of the linear coefficient.
    :param eta_sqr: Ascent step of the squared coefficient.
    :param beta_cap: Upper cap on both coefficients.
    :param persist_across_episodes: Keep coefficients between episodes instead of resetting them.
    :param mode: dynamic (combined, ascending coefficients), linear, squared, or off.
    """

    c_bound: int = 7
    beta_lin0: float = 10.0
    beta_sqr0: float = 20.0
    eta_lin: float = 5.0
    eta_sqr: float = 1.0
    beta_cap: float = 1000.0
    persist_across_episodes: bool = True
    mode: PenaltyMode = "dynamic"


class CalendarStamp(t.NamedTuple):
    """
    Calendar position of one market sample.

    :param hour: Hour of day, 0..23.
    :param week: Week of year, 0..51.
    :param month: Month, 0..11.
    """

    hour: int
    week: int
    month: int


class MarketSeries(t.NamedTuple):
    """
    Hourly renewable generation and upstream price, aligned on one calendar.

    :param pv: Renewable generation per sample (kW).
    :param dso_price: DSO price per sample (currency/kWh).
    :param calendar: Calendar stamp per sample.
    """

    pv: t.Tuple[float, ...]
    dso_price: t.Tuple[float, ...]
    calendar: t.Tuple[CalendarStamp, ...]


class Scenario(t.NamedTuple):
    """
    A complete experiment configuration.

    :param users: End-users served by the provider.
    :param satisfaction: Satisfaction score weights.
    :param battery: Battery storage.
    :param pricing: Price bounds and renewable penalty.
    :param penalty: Satisfaction penalty.
    :param market: Market series; period t of the episode reads sample start + t.
    :param horizon: Episode length (periods).
    :param t_his: History window length (periods).
    :param t_pre: Forecast window length (periods).
    :param start: Market index of episode period 0.
    :param sequence_len: Configured window length; must equal t_his + t_pre.
    """

    users: t.Tuple[UserProfile, ...]
    satisfaction: SatisfactionConfig
    battery: BatterySpec
    pricing: PricingRules
    penalty: PenaltyConfig
    market: MarketSeries
    horizon: int = 24
    t_his: int = 24
    t_pre: int = 8
    start: int = 0
    sequence_len: int = DEFAULT_SEQUENCE_LEN

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def window(self) -> int:
        return self.t_his + self.t_pre

    @property
    def obs_dim(self) -> int:
        return 2 * self.window + 8


class Violation(t.NamedTuple):
    field: str
    rule: str
    value: t.Any = None

    def __str__(self) -> str:
        return f"{self.field}: {self.rule} (got {self.value!r})"


def _finite(x: t.Any) -> bool:
    try:
        return math.isfinite(float(x))
    except (TypeError, ValueError):
        return False


class _Checker:
    def __init__(self) -> None:
        self.violations: t.List[Violation] = []

    def __call__(self, ok: bool, field: str, rule: str, value: t.Any = None) -> bool:
        if not ok:
            self.violations.append(Violation(field=field, rule=rule, value=value))
        return ok


def _check_user(check: _Checker, i: int, u: UserProfile, horizon: int) -> None:
    name = f"users[{i}]"
    check(_finite(u.u_a) and u.u_a < 0, f"{name}.u_a", "must be < 0", u.u_a)
    check(_finite(u.u_b) and u.u_b > 0, f"{name}.u_b", "must be > 0", u.u_b)
    check(_finite(u.epsilon) and u.epsilon >= 0, f"{name}.epsilon", "must be >= 0", u.epsilon)
    for key in ("d_lo", "d_hi", "d_ideal"):
        arr = getattr(u, key)
        check(
            len(arr) >= horizon,
            f"{name}.{key}",
            f"needs at least horizon={horizon} entries",
            len(arr),
        )
    for k, (lo, ideal, hi) in enumerate(zip(u.d_lo, u.d_ideal, u.d_hi)):
        if not check(
            all(_finite(x) for x in (lo, ideal, hi)), f"{name}.d_*[{k}]", "must be finite"
        ):
            continue
        check(
            lo <= ideal <= hi,
            f"{name}.d_*[{k}]",
            "must satisfy d_lo <= d_ideal <= d_hi",
            (lo, ideal, hi),
        )


def _check_battery(check: _Checker, b: BatterySpec) -> None:
    for key in BatterySpec._fields:
        check(_finite(getattr(b, key)), f"battery.{key}", "must be finite", getattr(b, key))
    check(b.p_min <= 0 <= b.p_max, "battery.p_min/p_max", "must satisfy p_min <= 0 <= p_max", (b.p_min, b.p_max))
    check(
        0 <= b.soc_min < b.soc_max <= 1,
        "battery.soc_min/soc_max",
        "must satisfy 0 <= soc_min < soc_max <= 1",
        (b.soc_min, b.soc_max),
    )
    check(b.soc_min <= b.soc0 <= b.soc_max, "battery.soc0", "must lie in [soc_min, soc_max]", b.soc0)
    check(0 < b.eta_ch <= 1, "battery.eta_ch", "must lie in (0, 1]", b.eta_ch)
    check(0 < b.eta_dis <= 1, "battery.eta_dis", "must lie in (0, 1]", b.eta_dis)
    check(b.capacity >= 0, "battery.capacity", "must be >= 0", b.capacity)
    check(b.alpha_b >= 0, "battery.alpha_b", "must be >= 0", b.alpha_b)


def _check_market(check: _Checker, s: Scenario) -> None:
    m = s.market
    n = len(m.pv)
    check(
        len(m.dso_price) == n and len(m.calendar) == n,
        "market",
        "pv, dso_price and calendar must share one length",
        (len(m.pv), len(m.dso_price), len(m.calendar)),
    )
    bad_pv = [k for k, v in enumerate(m.pv) if not (_finite(v) and v >= 0)]
    check(not bad_pv, "market.pv", "must be >= 0", bad_pv[:5])
    bad_price = [k for k, v in enumerate(m.dso_price) if not (_finite(v) and v > 0)]
    check(not bad_price, "market.dso_price", "must be > 0", bad_price[:5])
    bad_cal = [
        k
        for k, c in enumerate(m.calendar)
        if not (0 <= c.hour <= 23 and 0 <= c.week <= 51 and 0 <= c.month <= 11)
    ]
    check(not bad_cal, "market.calendar", "hour in 0..23, week in 0..51, month in 0..11", bad_cal[:5])
    last = s.start + s.horizon - 1 + s.t_pre
    check(
        last < min(n, len(m.dso_price), len(m.calendar)) and s.start >= 0,
        "market",
        f"must cover episode and forecast windows up to index {last}",
        n,
    )


def validate_scenario(s: Scenario) -> t.List[Violation]:
    """
    Check every invariant of a scenario.

    Returns an empty list iff the scenario is valid; each violation names the field and the rule.
    Pure and idempotent.

    :param s: The scenario to validate.
    """
    check = _Checker()

    check(s.horizon >= 1, "horizon", "must be >= 1", s.horizon)
    check(s.t_his >= 1, "t_his", "must be >= 1", s.t_his)
    check(s.t_pre >= 0, "t_pre", "must be >= 0", s.t_pre)
    check(s.start >= 0, "start", "must be >= 0", s.start)
    check(
        s.t_his + s.t_pre == s.sequence_len,
        "t_his/t_pre",
        f"t_his + t_pre must equal sequence_len={s.sequence_len}",
        s.t_his + s.t_pre,
    )

    check(len(s.users) >= 1, "users", "needs at least one user", len(s.users))
    for i, u in enumerate(s.users):
        _check_user(check, i, u, s.horizon)

    w = s.satisfaction
    check(w.omega1 >= 0, "satisfaction.omega1", "must be >= 0", w.omega1)
    check(w.omega2 >= 0, "satisfaction.omega2", "must be >= 0", w.omega2)
    check(
        w.omega1 + w.omega2 <= 10,
        "satisfaction.omega1+omega2",
        "must be <= 10",
        w.omega1 + w.omega2,
    )

    _check_battery(check, s.battery)

    p = s.pricing
    check(0 < p.k1 <= p.k2, "pricing.k1/k2", "must satisfy 0 < k1 <= k2", (p.k1, p.k2))
    check(p.delta_lambda >= 0, "pricing.delta_lambda", "must be >= 0", p.delta_lambda)
    check(p.rho_res >= 0, "pricing.rho_res", "must be >= 0", p.rho_res)

    c = s.penalty
    check(0 <= c.c_bound <= 10, "penalty.c_bound", "must lie in [0, 10]", c.c_bound)
    for key in ("beta_lin0", "beta_sqr0", "eta_lin", "eta_sqr"):
        check(getattr(c, key) >= 0, f"penalty.{key}", "must be >= 0", getattr(c, key))
    check(
        c.beta_cap > max(c.beta_lin0, c.beta_sqr0),
        "penalty.beta_cap",
        "must exceed both initial coefficients",
        c.beta_cap,
    )
    check(
        c.mode in t.get_args(PenaltyMode), "penalty.mode", f"must be one of {t.get_args(PenaltyMode)}", c.mode
    )

    _check_market(check, s)
    return check.violations


def require_valid(s: Scenario) -> Scenario:
    """
    Return the scenario unchanged, or raise if it has violations.

    :raises exceptions.ScenarioValidationException: If `validate_scenario` reports anything
    """
    if violations := validate_scenario(s):
        raise exceptions.ScenarioValidationException(violations=violations)
    return s


def default_users(ref_price: t.Sequence[float] = (0.15,) * 24) -> t.Tuple[UserProfile, ...]:
    """
    Three users whose ideal demand is their own optimum at a reference retail tariff.

    A tariff that charges `ref_price` in every period meets each ideal up to rounding;
    bounds sit at 0.6x and 1.4x of the ideal.

    :param ref_price: Reference retail price per episode period (currency/kWh).
    """
    users = []
    for u_a, u_b in DEFAULT_UTILITIES:
        ideal = tuple(round((u_b - p) / (-2.0 * u_a), 6) for p in ref_price)
        users.append(
            UserProfile(
                u_a=u_a,
                u_b=u_b,
                d_lo=tuple(round(0.6 * d, 6) for d in ideal),
                d_hi=tuple(round(1.4 * d, 6) for d in ideal),
                d_ideal=ideal,
            )
        )
    return tuple(users)
