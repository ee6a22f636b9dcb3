from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml

from drlab import exceptions
from drlab.dataio import (
    SeriesColumn,
    dump_scenario,
    load_scenario,
    load_series,
    market_from_series,
    scale_series,
    synth_scenario,
    write_series,
)
from drlab.domain import BatterySpec
from drlab.marshal import marshal_value


def hourly(start, n):
    return tuple(str(ts) for ts in pd.date_range(start, periods=n, freq=pd.Timedelta(hours=1)))


def write_text(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_series_round_trip(tmp_path, rng):
    column = SeriesColumn(hourly("2023-03-01", 48), tuple(rng.uniform(0, 40, size=48)), "kW")
    path = tmp_path / "pv.csv"
    write_series(path, column, name="pv")
    loaded = load_series(path, "kW")
    assert loaded == column
    assert [c.hour for c in loaded.calendar] == [k % 24 for k in range(48)]
    assert {c.month for c in loaded.calendar} == {2}


def test_series_rejects_duplicate_timestamp(tmp_path):
    path = write_text(
        tmp_path / "pv.csv",
        ["timestamp,pv[kW]", "2023-01-01 00:00,1.0", "2023-01-01 01:00,2.0", "2023-01-01 01:00,3.0"],
    )
    with pytest.raises(exceptions.SeriesFormatException, match=r"row 4.*duplicate"):
        load_series(path, "kW")


def test_series_rejects_gaps(tmp_path):
    path = write_text(
        tmp_path / "pv.csv",
        ["timestamp,pv[kW]", "2023-01-01 00:00,1.0", "2023-01-01 01:00,2.0", "2023-01-01 03:00,3.0"],
    )
    with pytest.raises(exceptions.SeriesFormatException, match="non-hourly"):
        load_series(path, "kW")


@pytest.mark.parametrize("header", ["timestamp,pv[W]", "timestamp,pv"])
def test_series_requires_declared_units(tmp_path, header):
    path = write_text(tmp_path / "pv.csv", [header, "2023-01-01 00:00,1.0"])
    with pytest.raises(exceptions.SeriesFormatException, match="units"):
        load_series(path, "kW")


def test_series_rejects_non_finite_values(tmp_path):
    path = write_text(
        tmp_path / "pv.csv", ["timestamp,pv[kW]", "2023-01-01 00:00,1.0", "2023-01-01 01:00,nan"]
    )
    with pytest.raises(exceptions.SeriesFormatException, match="row 3"):
        load_series(path, "kW")


def test_series_missing_file(tmp_path):
    with pytest.raises(exceptions.SeriesFormatException):
        load_series(tmp_path / "absent.csv", "kW")


def test_scale_series():
    column = SeriesColumn(hourly("2023-01-01", 3), (1.0, 2.5, 0.0), "kW")
    assert scale_series(column, 1.0) == column
    doubled = scale_series(column, 2.0)
    assert doubled.values == (2.0, 5.0, 0.0)
    assert doubled.timestamps == column.timestamps
    for factor in (0.0, -1.0):
        with pytest.raises(exceptions.SeriesFormatException):
            scale_series(column, factor)


def test_market_from_series_requires_aligned_timestamps():
    pv = SeriesColumn(hourly("2023-01-01", 3), (1.0, 2.0, 3.0), "kW")
    price = SeriesColumn(hourly("2023-01-02", 3), (0.1, 0.1, 0.1), "currency/kWh")
    with pytest.raises(exceptions.SeriesFormatException):
        market_from_series(pv, price)
    market = market_from_series(pv, price._replace(timestamps=pv.timestamps))
    assert market.pv == pv.values
    assert len(market.calendar) == 3


def test_synth_is_deterministic():
    assert synth_scenario(4, "winter") == synth_scenario(4, "winter")
    assert synth_scenario(4, "winter").market != synth_scenario(5, "winter").market


def test_synth_seasons():
    winter, summer = synth_scenario(0, "winter"), synth_scenario(0, "summer")
    day = slice(winter.start, winter.start + 24)
    assert sum(winter.market.pv[day]) < sum(summer.market.pv[day])
    for s in (winter, summer):
        assert all(v >= 0 for v in s.market.pv)
        assert all(v > 0 for v in s.market.dso_price)
        assert s.market.pv[s.start] == 0.0  # midnight
    assert (winter.penalty.eta_lin, winter.penalty.eta_sqr) == (5.0, 1.0)
    assert (summer.penalty.eta_lin, summer.penalty.eta_sqr) == (5.0, 5.0)


def test_synth_rejects_unknown_profile():
    with pytest.raises(exceptions.InvalidArgumentException):
        synth_scenario(0, "spring")  # type: ignore[arg-type]


def test_scenario_file_round_trip(tmp_path):
    s = synth_scenario(2, "summer")
    path = tmp_path / "scenario.yaml"
    dump_scenario(s, path)
    assert load_scenario(path) == s


def test_scenario_file_with_series_section(tmp_path):
    s = synth_scenario(1, "winter")
    stamps = hourly("2023-01-14", len(s.market.pv))
    write_series(tmp_path / "pv.csv", SeriesColumn(stamps, s.market.pv, "kW"), name="pv")
    write_series(tmp_path / "price.csv", SeriesColumn(stamps, s.market.dso_price, "currency/kWh"), name="price")
    doc = marshal_value(s)
    del doc["market"]
    doc["series"] = {"pv_file": "pv.csv", "price_file": "price.csv", "pv_scale": 2.0}
    path = tmp_path / "scenario.yaml"
    path.write_text(yaml.safe_dump(doc), encoding="utf-8")

    loaded = load_scenario(path)
    assert loaded.market.pv == tuple(2.0 * v for v in s.market.pv)
    assert loaded.market.dso_price == s.market.dso_price
    assert loaded.market.calendar == s.market.calendar


def test_series_section_requires_files(tmp_path):
    doc = marshal_value(synth_scenario(0, "winter"))
    del doc["market"]
    doc["series"] = {"price_file": "price.csv"}
    path = tmp_path / "scenario.yaml"
    path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    with pytest.raises(exceptions.RequiredParameterException):
        load_scenario(path)


def test_invalid_scenario_file(tmp_path):
    s = synth_scenario(0, "winter")._replace(battery=BatterySpec(soc0=0.05))
    path = tmp_path / "scenario.yaml"
    dump_scenario(s, path)
    with pytest.raises(exceptions.ScenarioValidationException, match="battery.soc0"):
        load_scenario(path)


def test_scenario_file_must_be_a_mapping(tmp_path):
    path = write_text(tmp_path / "scenario.yaml", ["- 1", "- 2"])
    with pytest.raises(exceptions.TypeMismatchException):
        load_scenario(path)


def test_scenario_file_field_errors_name_the_field(tmp_path):
    doc = marshal_value(synth_scenario(0, "winter"))
    doc["users"][1]["u_a"] = "steep"
    path = tmp_path / "scenario.yaml"
    path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    with pytest.raises(exceptions.TypeMismatchException, match=r"users\[1\]\.u_a"):
        load_scenario(path)


def test_synth_series_have_three_days():
    s = synth_scenario(0, "winter")
    assert len(s.market.pv) == 72
    assert np.isclose(max(s.market.pv), 25.0, rtol=0.3)


def test_documented_example_scenario_loads():
    path = Path(__file__).parent.parent / "docs" / "scenario.yaml"
    s = load_scenario(path)
    assert (s.horizon, s.n_users, s.sequence_len) == (4, 2, 4)
    assert s.market.calendar[0] == (17, 2, 0)
    assert s.penalty.mode == "dynamic"
