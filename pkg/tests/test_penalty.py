import numpy as np
import pytest

from drlab.domain import PenaltyConfig
from drlab.penalty import (
    PenaltyState,
    combined_penalty,
    initial_state,
    linear_penalty,
    penalty_value,
    squared_penalty,
    step_penalty,
    update_coefficients,
)


def state(beta_lin=10.0, beta_sqr=20.0, **cfg):
    return PenaltyState(beta_lin=beta_lin, beta_sqr=beta_sqr, cfg=PenaltyConfig(**cfg))


@pytest.mark.parametrize(
    "beta, c_ave, expected",
    [(10, 8, 0.0), (10, 6, 10.0), (0, 2, 0.0)],
)
def test_linear_penalty(beta, c_ave, expected):
    assert linear_penalty(beta, 7, c_ave) == pytest.approx(expected)


@pytest.mark.parametrize(
    "c_ave, expected",
    [(7, 0.0), (6, 20.0), (8, 20.0)],
)
def test_squared_penalty(c_ave, expected):
    assert squared_penalty(20, 7, c_ave) == pytest.approx(expected)


@pytest.mark.parametrize(
    "c_ave, expected",
    [(6, 15.0), (7, 0.0), (7.5, 2.5)],
)
def test_combined_penalty(c_ave, expected):
    assert combined_penalty(state(), 7, c_ave) == pytest.approx(expected)


def test_update_coefficients():
    assert update_coefficients(state(), 7, 6).beta_lin == 15
    assert update_coefficients(state(), 7, 9).beta_lin == 0
    assert update_coefficients(state(), 7, 7)[:2] == (10, 20)
    assert update_coefficients(state(), 7, 9).beta_sqr == 22


def test_linear_coefficient_climbs_to_cap():
    st = state(beta_lin=10.0, beta_sqr=0.0)
    previous = st.beta_lin
    for _ in range(300):
        st = update_coefficients(st, 7, 6)
        if previous + 5 <= 1000:
            assert st.beta_lin == previous + 5
        else:
            assert st.beta_lin == 1000
        previous = st.beta_lin
    assert st.beta_lin == 1000
    assert st.beta_sqr == 300


def test_coefficients_stay_in_bounds():
    rng = np.random.default_rng(3)
    st = state(eta_lin=50.0, eta_sqr=40.0, beta_cap=500.0)
    for c_ave in rng.uniform(0, 10, size=2000):
        st = update_coefficients(st, 7, c_ave)
        assert 0 <= st.beta_lin <= 500
        assert 0 <= st.beta_sqr <= 500
        assert combined_penalty(st, 7, c_ave) >= 0


def test_squared_coefficient_never_decreases():
    st = state()
    for c_ave in (9, 9, 3, 10, 7, 8):
        nxt = update_coefficients(st, 7, c_ave)
        assert nxt.beta_sqr >= st.beta_sqr
        st = nxt


def test_step_penalty_uses_coefficients_before_update():
    value, st = step_penalty(state(), 6)
    assert value == pytest.approx(15.0)
    assert st.beta_lin == 15
    assert st.beta_sqr == 21


@pytest.mark.parametrize(
    "mode, expected",
    [("dynamic", 15.0), ("linear", 10.0), ("squared", 20.0), ("off", 0.0)],
)
def test_penalty_modes(mode, expected):
    st = initial_state(PenaltyConfig(mode=mode))
    value, nxt = step_penalty(st, 6)
    assert value == pytest.approx(expected)
    assert penalty_value(st, 6) == pytest.approx(expected)
    if mode != "dynamic":
        assert nxt == st


def test_initial_state():
    st = initial_state(PenaltyConfig(beta_lin0=1.0, beta_sqr0=2.0))
    assert (st.beta_lin, st.beta_sqr) == (1.0, 2.0)
