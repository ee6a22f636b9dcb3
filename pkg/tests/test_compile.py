import typing as t

import pydantic
import pytest

from drlab import exceptions
from drlab._registry import Registry
from drlab.compile import compile_object
from drlab.dataio import synth_scenario
from drlab.domain import BatterySpec, PenaltyConfig, Scenario, UserProfile
from drlab.marshal import marshal_schema, marshal_value
from drlab.td3_agent import AgentConfig


def test_compile_namedtuple_with_defaults():
    battery = compile_object(BatterySpec, arguments={"capacity": 50, "soc0": 0.4})
    assert battery == BatterySpec(capacity=50.0, soc0=0.4)
    assert isinstance(battery.capacity, float)


def test_compile_from_json_text():
    assert compile_object(PenaltyConfig, arguments='{"c_bound": 6, "mode": "linear"}') == PenaltyConfig(
        c_bound=6, mode="linear"
    )
    with pytest.raises(ValueError):
        compile_object(PenaltyConfig, arguments="{not json")


def test_compile_positional_sequence():
    assert compile_object(BatterySpec, arguments=[-5, 5]) == BatterySpec(p_min=-5.0, p_max=5.0)


def test_compile_missing_required_field():
    with pytest.raises(exceptions.RequiredParameterException, match="u_b"):
        compile_object(UserProfile, arguments={"u_a": -1.0, "d_lo": [0], "d_hi": [1], "d_ideal": [0.5]})


def test_compile_rejects_bool_for_number():
    with pytest.raises(exceptions.TypeMismatchException, match="capacity"):
        compile_object(BatterySpec, arguments={"capacity": True})


def test_compile_rejects_unknown_literal():
    with pytest.raises(exceptions.InvalidArgumentException):
        compile_object(PenaltyConfig, arguments={"mode": "sometimes"})


def test_compile_rejects_non_mapping():
    with pytest.raises(exceptions.TypeMismatchException):
        compile_object(BatterySpec, arguments=3)  # type: ignore[arg-type]


def test_compile_unsupported_class():
    with pytest.raises(ValueError):
        compile_object(dict, arguments={})


def test_compile_nested_scenario_round_trip():
    s = synth_scenario(0, "summer")
    assert compile_object(Scenario, arguments=marshal_value(s)) == s


def test_compile_nested_error_names_the_path():
    doc = marshal_value(synth_scenario(0, "winter"))
    doc["market"]["calendar"][3]["hour"] = "noon"
    with pytest.raises(exceptions.TypeMismatchException, match=r"market\.calendar\[3\]\.hour"):
        compile_object(Scenario, arguments=doc)


def test_compile_pydantic_model():
    cfg = compile_object(AgentConfig, arguments={"batch": 8, "head_hidden": [4, 4], "extractor": "mlp"})
    assert cfg.batch == 8
    assert cfg.head_hidden == (4, 4)
    assert cfg.gamma == 0.99
    with pytest.raises(pydantic.ValidationError):
        compile_object(AgentConfig, arguments={"gamma": 2.0})


def test_schema_of_namedtuple():
    schema = marshal_schema(BatterySpec)
    assert schema["type"] == "object"
    assert schema["required"] == []
    capacity = schema["properties"]["capacity"]
    assert capacity == {"type": "number", "description": "Energy capacity (kWh).", "default": 100.0}
    assert "Positive power charges." in schema["description"]


def test_schema_required_and_arrays():
    schema = marshal_schema(UserProfile)
    assert schema["required"] == ["u_a", "u_b", "d_lo", "d_hi", "d_ideal"]
    assert schema["properties"]["d_lo"]["type"] == "array"
    assert schema["properties"]["d_lo"]["items"] == {"type": "number"}


def test_schema_literal_enum():
    mode = marshal_schema(PenaltyConfig)["properties"]["mode"]
    assert mode["enum"] == ["dynamic", "linear", "squared", "off"]
    assert mode["default"] == "dynamic"


def test_schema_nested_sections():
    schema = marshal_schema(Scenario)
    assert schema["properties"]["battery"]["properties"]["soc0"]["default"] == 0.5
    assert schema["properties"]["users"]["items"]["type"] == "object"
    assert "market" in schema["required"]


def test_schema_of_pydantic_model():
    schema = marshal_schema(AgentConfig)
    assert schema["properties"]["gamma"]["description"] == "Discount rate of future rewards."
    assert schema["properties"]["head_hidden"]["default"] == [64, 64]
    assert schema["required"] == []


def test_schema_unsupported():
    with pytest.raises(ValueError):
        marshal_schema(int)


def test_marshal_value_is_plain_data():
    doc = marshal_value(PenaltyConfig())
    assert doc["mode"] == "dynamic"
    assert marshal_value((1, (2.0, 3))) == [1, [2.0, 3]]


def test_registry():
    registry: Registry[t.Callable[..., t.Any]] = Registry("extractor")

    @registry.register("first")
    def first():
        return 1

    registry["second"] = lambda: 2
    assert len(registry) == 2
    assert "first" in registry
    assert list(registry) == registry.names() == ["first", "second"]
    assert registry["second"]() == 2
    registry.register("first")(first)  # same object again is fine

    with pytest.raises(exceptions.RegistryException, match="already registered"):
        registry["first"] = lambda: 3
    with pytest.raises(exceptions.RegistryException, match="has not been registered"):
        registry["third"]


def test_registry_override():
    registry: Registry[int] = Registry("number", override=True)
    registry["x"] = 1
    registry["x"] = 2
    assert registry["x"] == 2
    assert "number" in repr(registry)
