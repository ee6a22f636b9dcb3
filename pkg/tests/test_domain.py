import pytest

from drlab import exceptions
from drlab import user_model as um
from drlab.dataio import synth_scenario
from drlab.domain import (
    BatterySpec,
    SatisfactionConfig,
    default_users,
    require_valid,
    validate_scenario,
)


def test_default_scenarios_are_valid(make_scenario):
    assert validate_scenario(make_scenario()) == []
    assert validate_scenario(synth_scenario(0, "winter")) == []
    assert validate_scenario(synth_scenario(3, "summer")) == []


def test_positive_curvature_is_one_violation(make_scenario):
    s = make_scenario()
    s = s._replace(users=(s.users[0]._replace(u_a=1.0),))
    violations = validate_scenario(s)
    assert len(violations) == 1
    assert violations[0].field == "users[0].u_a"
    assert "< 0" in violations[0].rule


def test_satisfaction_weights_over_ten(make_scenario):
    s = make_scenario()._replace(satisfaction=SatisfactionConfig(omega1=6, omega2=5))
    violations = validate_scenario(s)
    assert [v.field for v in violations] == ["satisfaction.omega1+omega2"]


def test_short_market_is_rejected(make_scenario):
    s = make_scenario(horizon=4, t_pre=2)
    m = s.market
    s = s._replace(market=m._replace(pv=m.pv[:-2], dso_price=m.dso_price[:-2], calendar=m.calendar[:-2]))
    assert any(v.field == "market" for v in validate_scenario(s))


def test_window_must_match_sequence_len(make_scenario):
    s = make_scenario()._replace(sequence_len=32)
    assert [v.field for v in validate_scenario(s)] == ["t_his/t_pre"]


def test_demand_bounds_ordering(make_scenario):
    s = make_scenario()
    u = s.users[0]
    bad = u._replace(d_lo=(20.0,) + u.d_lo[1:])
    violations = validate_scenario(s._replace(users=(bad,)))
    assert [v.field for v in violations] == ["users[0].d_*[0]"]


@pytest.mark.parametrize(
    "battery",
    [
        BatterySpec(p_min=0.0, p_max=0.0),
        BatterySpec(capacity=0.0),
    ],
)
def test_batteryless_variants_are_valid(make_scenario, battery):
    assert validate_scenario(make_scenario(battery=battery)) == []


def test_require_valid_raises_with_violations(make_scenario):
    s = make_scenario(battery=BatterySpec(soc0=0.95))
    with pytest.raises(exceptions.ScenarioValidationException) as exc_info:
        require_valid(s)
    assert [v.field for v in exc_info.value.violations] == ["battery.soc0"]
    assert "battery.soc0" in str(exc_info.value)


def test_validation_is_idempotent(make_scenario):
    s = make_scenario()._replace(satisfaction=SatisfactionConfig(omega1=-1))
    assert validate_scenario(s) == validate_scenario(s)


def test_default_users_optimum_is_ideal_at_reference_price():
    ref = [0.12, 0.15, 0.21]
    for user in default_users(ref):
        assert len(user.d_ideal) == 3
        assert [um.optimal_demand(user, p, k) for k, p in enumerate(ref)] == pytest.approx(user.d_ideal)
        assert all(lo <= i <= hi for lo, i, hi in zip(user.d_lo, user.d_ideal, user.d_hi))
        assert user.u_a < 0 < user.u_b
