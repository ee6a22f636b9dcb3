"""
Satisfaction penalties: the constant-coefficient linear and squared forms, and the
dynamically adjusted combined form whose coefficients ascend with the violation.
"""

from __future__ import annotations

import typing as t

from .domain import PenaltyConfig

__all__ = (
    "PenaltyState",
    "combined_penalty",
    "initial_state",
    "linear_penalty",
    "penalty_value",
    "squared_penalty",
    "step_penalty",
    "update_coefficients",
)


class PenaltyState(t.NamedTuple):
    """
    Current penalty coefficients.

    :param beta_lin: Linear coefficient, in [0, cfg.beta_cap].
    :param beta_sqr: Squared coefficient, in [0, cfg.beta_cap].
    :param cfg: The penalty configuration the state evolves under.
    """

    beta_lin: float
    beta_sqr: float
    cfg: PenaltyConfig


def initial_state(cfg: PenaltyConfig) -> PenaltyState:
    return PenaltyState(beta_lin=cfg.beta_lin0, beta_sqr=cfg.beta_sqr0, cfg=cfg)


def linear_penalty(beta: float, c_bound: float, c_ave: float) -> float:
    return beta * max(0.0, c_bound - c_ave)


def squared_penalty(beta: float, c_bound: float, c_ave: float) -> float:
    # deviations above the bound are penalized too
    return beta * (c_bound - c_ave) ** 2


def combined_penalty(st: PenaltyState, c_bound: float, c_ave: float) -> float:
    """Half-weighted sum of the linear and squared penalties at the current coefficients."""
    return 0.5 * linear_penalty(st.beta_lin, c_bound, c_ave) + 0.5 * squared_penalty(
        st.beta_sqr, c_bound, c_ave
    )


def update_coefficients(st: PenaltyState, c_bound: float, c_ave: float) -> PenaltyState:
    """
    One ascent step on both coefficients, clamped to [0, beta_cap].

    The squared coefficient only grows; the cap keeps it from dominating the reward.
    """
    gap = c_bound - c_ave
    cap = st.cfg.beta_cap
    beta_lin = min(cap, max(0.0, st.beta_lin + st.cfg.eta_lin * gap))
    beta_sqr = min(cap, st.beta_sqr + st.cfg.eta_sqr * abs(gap))
    return st._replace(beta_lin=beta_lin, beta_sqr=beta_sqr)


def penalty_value(st: PenaltyState, c_ave: float) -> float:
    """Penalty for the configured mode, at the current coefficients."""
    cfg = st.cfg
    if cfg.mode == "dynamic":
        return combined_penalty(st, cfg.c_bound, c_ave)
    if cfg.mode == "linear":
        return linear_penalty(cfg.beta_lin0, cfg.c_bound, c_ave)
    if cfg.mode == "squared":
        return squared_penalty(cfg.beta_sqr0, cfg.c_bound, c_ave)
    return 0.0


def step_penalty(st: PenaltyState, c_ave: float) -> t.Tuple[float, PenaltyState]:
    """
    Penalty for this period, then the coefficient update.

    Only the dynamic mode moves its coefficients.
    """
    value = penalty_value(st, c_ave)
    if st.cfg.mode == "dynamic":
        st = update_coefficients(st, st.cfg.c_bound, c_ave)
    return value, st
