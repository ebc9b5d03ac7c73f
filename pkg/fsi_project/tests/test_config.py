import pytest

from config.settings import (
    SCHEMA, apply_overrides, default_config, parse_config, parse_literal, serialize_config,
)
from core.errors import ConfigError
from core.grid import BCMode


def test_defaults_fill_every_key():
    config = default_config()
    for name, keys in SCHEMA.items():
        assert set(config[name]) == {k for k, *_ in keys}
    assert config["params"]["stabilization"] is None
    assert config.model_params().stabilization == pytest.approx(1.0 / (2 * 0.05 ** 2))


def test_serialized_config_parses_back(tiny_config):
    text = serialize_config(tiny_config)
    again = parse_config(text)
    assert again.sections == tiny_config.sections
    assert serialize_config(again) == text


def test_tiny_config_values(tiny_config):
    assert tiny_config.grid_spec().cells == (8, 8)
    assert tiny_config.grid_spec().bc_mode is BCMode.PHYSICAL
    assert tiny_config["time"]["dt"] == 1e-3
    assert isinstance(tiny_config["grid"]["extents"][0], float)


def test_negative_lambda_is_reported_with_line():
    with pytest.raises(ConfigError) as err:
        parse_config("[params]\nlambda = -1.0\n")
    assert err.value.errors == ["params.lambda: must be positive, got -1.0 (line 2)"]


def test_all_problems_are_collected():
    text = "[grid]\ncells = [8, 2]\nbogus = 1\n\n[time]\ndt = \"fast\"\n"
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    messages = err.value.errors
    assert any(m.startswith("grid.bogus: unknown key (line 3)") for m in messages)
    assert any(m.startswith("grid.cells: must be all >= 4") for m in messages)
    assert any(m.startswith("time.dt: expected float") for m in messages)


def test_unknown_section():
    with pytest.raises(ConfigError) as err:
        parse_config("[extras]\nx = 1\n")
    assert err.value.errors == ["extras: unknown section (line 1)"]


def test_duplicate_key_is_a_parse_error():
    with pytest.raises(ConfigError) as err:
        parse_config("[time]\ndt = 1e-3\ndt = 2e-3\n")
    assert err.value.errors[0].startswith("parse error")


def test_cross_checks():
    with pytest.raises(ConfigError, match="taylor-green"):
        parse_config("[initial]\npreset = \"taylor-green\"\n")
    with pytest.raises(ConfigError, match="initial.checkpoint"):
        parse_config("[initial]\npreset = \"checkpoint\"\n")
    with pytest.raises(ConfigError, match="params"):
        parse_config("[params]\neta_range = [1.0, 50.0]\n")


def test_overrides(tiny_config_text):
    config = parse_config(tiny_config_text, ["params.lambda=0.5", "grid.cells=[16, 16]",
                                             "initial.preset=spinodal"])
    assert config["params"]["lambda"] == 0.5
    assert config["grid"]["cells"] == [16, 16]
    assert config["initial"]["preset"] == "spinodal"

    with pytest.raises(ConfigError) as err:
        parse_config(tiny_config_text, ["time.dt=-1.0"])
    assert err.value.errors == ["time.dt: must be positive, got -1.0 (--set)"]


def test_override_parsing_helpers():
    raw = {}
    assert apply_overrides(raw, ["nodot=1"]) == ["override 'nodot=1': expected section.key=value"]
    assert apply_overrides(raw, ["run.name=sample"]) == []
    assert raw == {"run": {"name": "sample"}}
    assert parse_literal("[1, 2]") == [1, 2]
    assert parse_literal("true") is True


def test_with_updates_copies(tiny_config):
    updated = tiny_config.with_updates({"time": {"dt": 5e-4}})
    assert updated["time"]["dt"] == 5e-4
    assert tiny_config["time"]["dt"] == 1e-3
