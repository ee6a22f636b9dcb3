import math

import numpy as np
import pytest

from drlab.domain import SatisfactionConfig, UserProfile
from drlab.user_model import (
    deviation_index,
    limit_index,
    optimal_demand,
    respond,
    running_average_satisfaction,
    satisfaction_level,
    variation_index,
    welfare,
)


def user(u_a=-1.0, u_b=10.0, lo=0.0, hi=10.0, ideal=5.0, epsilon=0.05):
    return UserProfile(u_a=u_a, u_b=u_b, d_lo=(lo,), d_hi=(hi,), d_ideal=(ideal,), epsilon=epsilon)


@pytest.mark.parametrize(
    "profile, price, expected",
    [
        (user(-1.0, 10.0, 0, 10), 4.0, 3.0),
        (user(-1.0, 10.0, 0, 10), 10.0, 0.0),
        (user(-0.5, 8.0, 0, 4, ideal=2), 2.0, 4.0),
    ],
)
def test_optimal_demand(profile, price, expected):
    assert optimal_demand(profile, price, 0) == pytest.approx(expected)


def test_welfare():
    p = user()
    assert welfare(p, 3.0, 4.0) == pytest.approx(9.0)
    assert welfare(p, 0.0, 4.0) == 0.0
    best = welfare(p, optimal_demand(p, 4.0, 0), 4.0)
    assert all(best >= welfare(p, d, 4.0) for d in np.linspace(0, 10, 101))


def test_closed_form_matches_grid_search():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        u_a, u_b = rng.uniform(-2.0, -0.1), rng.uniform(1.0, 20.0)
        lo = rng.uniform(0.0, 5.0)
        hi = lo + rng.uniform(0.1, 5.0)
        price = rng.uniform(0.0, 25.0)
        p = user(u_a, u_b, lo, hi, ideal=lo)
        grid = np.arange(lo, hi + 1e-4, 1e-4)
        grid = grid[grid <= hi]
        best = grid[np.argmax(u_a * grid * grid + u_b * grid - price * grid)]
        assert abs(optimal_demand(p, price, 0) - best) <= 1e-3


@pytest.mark.parametrize(
    "ideal, demand, expected",
    [(5.0, 5.0, 0.0), (5.0, 10.0, 1.0), (8.0, 4.0, 0.5)],
)
def test_deviation_index(ideal, demand, expected):
    assert deviation_index(user(ideal=ideal), demand, 0) == pytest.approx(expected)


def test_deviation_index_degenerate_bounds():
    assert deviation_index(user(lo=5, hi=5, ideal=5), 5.0, 0) == 0.0


@pytest.mark.parametrize(
    "demand, prev, expected",
    [(4.0, 4.0, 0.0), (7.0, 3.0, 0.4), (10.0, 0.0, 1.0)],
)
def test_variation_index(demand, prev, expected):
    assert variation_index(user(), demand, prev, 0) == pytest.approx(expected)


def test_limit_index():
    p = user()
    assert limit_index(p, 10.0, 0) == 1
    assert limit_index(p, 5.0, 0) == 0
    assert limit_index(p, 9.96, 0) == 1
    assert limit_index(p, 0.04, 0) == 1


def test_satisfaction_level_examples():
    cfg = SatisfactionConfig(omega1=4, omega2=3)
    assert satisfaction_level(cfg, 0, 0, 0) == 10
    assert satisfaction_level(cfg, 0.5, 0.2, 0) == 7
    assert satisfaction_level(cfg, 1, 1, 1) == 0


def test_satisfaction_level_exact_integers_do_not_drop():
    cfg = SatisfactionConfig(omega1=4, omega2=3)
    assert satisfaction_level(cfg, 0.75, 0, 0) == 7
    assert satisfaction_level(cfg, 0.3, 0.1, 0) == 8


def test_satisfaction_ranges_randomized():
    rng = np.random.default_rng(11)
    for _ in range(100_000):
        w1 = rng.uniform(0, 10)
        w2 = rng.uniform(0, 10 - w1)
        cfg = SatisfactionConfig(omega1=w1, omega2=w2)
        lo = rng.uniform(0, 10)
        hi = lo + rng.uniform(0, 10)
        ideal = rng.uniform(lo, hi)
        p = user(lo=lo, hi=hi, ideal=ideal)
        d, prev = rng.uniform(lo, hi), rng.uniform(lo, hi)
        i_dev = deviation_index(p, d, 0)
        v_var = variation_index(p, d, prev, 0)
        l_lim = limit_index(p, d, 0)
        c = satisfaction_level(cfg, i_dev, v_var, l_lim)
        assert 0 <= i_dev <= 1
        assert 0 <= v_var <= 1
        assert l_lim in (0, 1)
        assert 0 <= c <= 10
        direct = 10 - w1 * i_dev - w2 * v_var - (10 - w1 - w2) * l_lim
        if abs(direct - round(direct)) > 1e-8:
            assert c == min(10, max(0, math.floor(direct)))


def test_running_average_satisfaction():
    assert running_average_satisfaction([[8, 6]], 1, 2) == 7.0
    assert running_average_satisfaction([[8, 6], [7, 9]], 2, 2) == 7.5
    assert running_average_satisfaction([[4, 4, 4]] * 5, 5, 3) == 4.0


def test_respond_composes_the_pieces():
    p = user(-1.0, 10.0, 0, 10, ideal=5.0)
    cfg = SatisfactionConfig()
    r = respond(p, cfg, 4.0, 2.0, 0)
    assert r.demand == pytest.approx(3.0)
    assert r.welfare == pytest.approx(9.0)
    assert r.indices == pytest.approx((0.4, 0.1, 0))
    assert r.satisfaction == satisfaction_level(cfg, 0.4, 0.1, 0)
