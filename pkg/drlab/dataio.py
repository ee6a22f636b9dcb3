"""
Series files, scenario files and synthetic scenarios.

A series file is a two-column CSV table with a one-line header, `timestamp,value[<units>]`,
one row per hour. Scenario files are YAML documents compiled into `Scenario`.
"""

from __future__ import annotations

import logging
import math
import os
import re
import typing as t
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import exceptions
from .compile import compile_object
from .domain import (
    BatterySpec,
    CalendarStamp,
    MarketSeries,
    PenaltyConfig,
    PricingRules,
    SatisfactionConfig,
    Scenario,
    default_users,
    require_valid,
)
from .marshal import marshal_value

__all__ = (
    "SeriesColumn",
    "calendar_stamp",
    "dump_scenario",
    "load_scenario",
    "load_series",
    "market_from_series",
    "scale_series",
    "synth_scenario",
    "write_series",
)

logger = logging.getLogger(__name__)

Profile = t.Literal["winter", "summer"]

_HEADER = re.compile(r"^\s*(?P<name>[^\[\]]+?)\s*\[(?P<units>[^\]]+)\]\s*$")
_HOUR = pd.Timedelta(hours=1)


class SeriesColumn(t.NamedTuple):
    """
    One hourly series.

    :param timestamps: ISO-8601 timestamps, strictly increasing at hourly spacing.
    :param values: Sample values.
    :param units: Declared units of the values.
    """

    timestamps: t.Tuple[str, ...]
    values: t.Tuple[float, ...]
    units: str

    @property
    def calendar(self) -> t.Tuple[CalendarStamp, ...]:
        return tuple(calendar_stamp(pd.Timestamp(ts)) for ts in self.timestamps)


def calendar_stamp(ts: pd.Timestamp) -> CalendarStamp:
    """Hour, ISO week minus one clamped to [0, 51], and zero-based month."""
    week = min(max(int(ts.isocalendar()[1]) - 1, 0), 51)
    return CalendarStamp(hour=ts.hour, week=week, month=ts.month - 1)


def load_series(path: str | os.PathLike[str], units: str) -> SeriesColumn:
    """
    Read a series file.

    :param units: Units the header must declare.

    :raises exceptions.SeriesFormatException: On parse failures, unit mismatches,
        duplicate or non-hourly timestamps
    """
    source = str(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, ValueError, pd.errors.ParserError) as err:
        raise exceptions.SeriesFormatException(source=source, reason=str(err)) from err

    if frame.shape[1] != 2:
        raise exceptions.SeriesFormatException(
            source=source, reason=f"expected 2 columns, found {frame.shape[1]}"
        )
    match = _HEADER.match(str(frame.columns[1]))
    if match is None:
        raise exceptions.SeriesFormatException(
            source=source, reason=f"value header {frame.columns[1]!r} declares no units"
        )
    if match["units"] != units:
        raise exceptions.SeriesFormatException(
            source=source, reason=f"units {match['units']!r} do not match expected {units!r}"
        )

    raw = frame.iloc[:, 0]
    stamps = []
    # file line of data row i is i + 2
    for i, text in enumerate(raw):
        try:
            stamps.append(pd.Timestamp(text))
        except (TypeError, ValueError) as err:
            raise exceptions.SeriesFormatException(
                source=source, reason=f"bad timestamp {text!r}", row=i + 2
            ) from err
    for i in range(1, len(stamps)):
        gap = stamps[i] - stamps[i - 1]
        if gap == pd.Timedelta(0):
            raise exceptions.SeriesFormatException(source=source, reason="duplicate timestamp", row=i + 2)
        if gap != _HOUR:
            raise exceptions.SeriesFormatException(
                source=source, reason=f"non-hourly spacing ({gap})", row=i + 2
            )

    try:
        values = pd.to_numeric(frame.iloc[:, 1]).to_numpy(dtype=np.float64)
    except (TypeError, ValueError) as err:
        raise exceptions.SeriesFormatException(source=source, reason=str(err)) from err
    if (bad := np.flatnonzero(~np.isfinite(values))).size:
        raise exceptions.SeriesFormatException(source=source, reason="non-finite value", row=int(bad[0]) + 2)

    logger.debug("loaded %d samples from %s", len(values), source)
    return SeriesColumn(
        timestamps=tuple(str(s) for s in raw),
        values=tuple(float(v) for v in values),
        units=units,
    )


def write_series(path: str | os.PathLike[str], column: SeriesColumn, name: str = "value") -> None:
    frame = pd.DataFrame(
        {"timestamp": list(column.timestamps), f"{name}[{column.units}]": list(column.values)}
    )
    frame.to_csv(path, index=False)


def scale_series(column: SeriesColumn, factor: float) -> SeriesColumn:
    """
    :raises exceptions.SeriesFormatException: If `factor` is not positive
    """
    if not (factor > 0 and math.isfinite(factor)):
        raise exceptions.SeriesFormatException(source="scale", reason=f"scale factor must be positive, got {factor}")
    return column._replace(values=tuple(v * factor for v in column.values))


def market_from_series(pv: SeriesColumn, price: SeriesColumn) -> MarketSeries:
    """
    :raises exceptions.SeriesFormatException: If the two series are not on the same timestamps
    """
    if pv.timestamps != price.timestamps:
        raise exceptions.SeriesFormatException(source="market", reason="PV and price timestamps differ")
    return MarketSeries(pv=pv.values, dso_price=price.values, calendar=pv.calendar)


_SYNTH_DAYS = 3
_SYNTH_FIRST_DAY = {"winter": "2023-01-14", "summer": "2023-10-04"}
_SYNTH_PV = {"winter": (25.0, 8, 17), "summer": (60.0, 6, 19)}  # peak kW, sunrise, sunset
_SYNTH_ETA = {"winter": (5.0, 1.0), "summer": (5.0, 5.0)}


def _synth_pv(profile: Profile, hours: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    peak, rise, sets = _SYNTH_PV[profile]
    phase = (hours - rise) / (sets - rise)
    shape = np.where((phase > 0) & (phase < 1), np.sin(np.pi * np.clip(phase, 0, 1)), 0.0)
    noise = 1.0 + rng.normal(0.0, 0.08, size=hours.shape)
    return np.maximum(peak * shape * noise, 0.0)


def _synth_price(hours: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    evening = 0.06 * np.exp(-0.5 * ((hours - 19) / 2.0) ** 2)
    morning = 0.02 * np.exp(-0.5 * ((hours - 8) / 1.5) ** 2)
    price = 0.08 + evening + morning + rng.normal(0.0, 0.004, size=hours.shape)
    return np.maximum(price, 0.01)


def synth_scenario(seed: int = 0, profile: Profile = "winter") -> Scenario:
    """
    Three days of hourly PV and DSO price around a seasonal profile; the episode is the
    middle day, so both the history and the forecast windows see real samples.

    PV is zero at night with a lower winter peak; the price has an evening peak.
    """
    if profile not in _SYNTH_FIRST_DAY:
        raise exceptions.InvalidArgumentException(arg=profile, type_base="profile", valid_args=list(_SYNTH_FIRST_DAY))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0 if profile == "winter" else 1]))
    stamps = pd.date_range(_SYNTH_FIRST_DAY[profile], periods=24 * _SYNTH_DAYS, freq=_HOUR)
    hours = stamps.hour.to_numpy().astype(np.float64)
    pv = _synth_pv(profile, hours, rng)
    price = _synth_price(hours, rng)

    eta_lin, eta_sqr = _SYNTH_ETA[profile]
    pricing = PricingRules()
    start, horizon = 24, 24
    # users are calibrated to the centre of the feasible retail band
    ref = 0.5 * (pricing.k1 + pricing.k2) * price[start : start + horizon]
    return Scenario(
        users=default_users([round(float(p), 6) for p in ref]),
        satisfaction=SatisfactionConfig(),
        battery=BatterySpec(),
        pricing=pricing,
        penalty=PenaltyConfig(eta_lin=eta_lin, eta_sqr=eta_sqr),
        market=MarketSeries(
            pv=tuple(round(float(v), 6) for v in pv),
            dso_price=tuple(round(float(v), 6) for v in price),
            calendar=tuple(calendar_stamp(s) for s in stamps),
        ),
        horizon=horizon,
        t_his=24,
        t_pre=8,
        start=start,
    )


def _series_market(section: t.Mapping[str, t.Any], base: Path) -> MarketSeries:
    try:
        pv = load_series(base / section["pv_file"], section.get("pv_units", "kW"))
        price = load_series(base / section["price_file"], section.get("price_units", "currency/kWh"))
    except KeyError as err:
        raise exceptions.RequiredParameterException(
            label=str(err.args[0]), type_base="section", type_name="series"
        ) from err
    pv = scale_series(pv, float(section.get("pv_scale", 1.0)))
    price = scale_series(price, float(section.get("price_scale", 1.0)))
    return market_from_series(pv, price)


def load_scenario(path: str | os.PathLike[str]) -> Scenario:
    """
    Read, compile and validate a scenario file.

    A `series` section (`pv_file`, `price_file`, optional `*_units` and `*_scale`) may stand in
    for `market`; file paths are relative to the scenario file.

    :raises exceptions.ScenarioValidationException: If the compiled scenario has violations
    :raises exceptions.SeriesFormatException: If a referenced series file is malformed
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fp:
        doc = yaml.safe_load(fp) or {}
    if not isinstance(doc, dict):
        raise exceptions.TypeMismatchException(
            expected_type_repr="dict", target_type_repr="Scenario", received_type_repr=type(doc).__name__
        )
    if "series" in doc:
        doc = dict(doc)
        market = _series_market(doc.pop("series"), path.parent)
        doc["market"] = marshal_value(market)
    scenario = compile_object(Scenario, arguments=doc)
    logger.debug("loaded scenario %s with %d users", path, scenario.n_users)
    return require_valid(scenario)


def dump_scenario(scenario: Scenario, path: str | os.PathLike[str]) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        yaml.safe_dump(marshal_value(scenario), fp, sort_keys=False)
