import pandas as pd

from handlers.commands import EXIT_USAGE, CommandContext, commands_router
from main import cli


def _write_config(tmp_path, text):
    path = tmp_path / "scenario.toml"
    path.write_text(text, encoding="utf-8")
    return path


def test_unknown_subcommand_is_usage_error(tmp_path):
    assert cli(["simulate", "--out", str(tmp_path)]) == 2


def test_router_rejects_unknown_name(tiny_config, tmp_path):
    assert commands_router.dispatch("simulate", CommandContext(tiny_config, tmp_path)) == EXIT_USAGE


def test_router_lists_every_command():
    assert set(commands_router.names) == {"run", "mms", "galerkin", "verify", "bench", "describe"}


def test_run_writes_outputs(tmp_path, tiny_config_text):
    config = _write_config(tmp_path, tiny_config_text)
    out = tmp_path / "out"
    assert cli(["run", "--config", str(config), "--out", str(out), "--set", "output.excel=false"]) == 0
    assert len(pd.read_csv(out / "series.csv")) == 3
    assert (out / "final.pfsi").exists()
    assert not (out / "summary.xlsx").exists()


def test_describe_prints_horizon(tmp_path, tiny_config_text, capsys):
    config = _write_config(tmp_path, tiny_config_text)
    assert cli(["describe", "--config", str(config), "--out", str(tmp_path)]) == 0
    printed = capsys.readouterr().out
    assert "existence horizon" in printed
    assert "[grid]" in printed


def test_invalid_config_is_usage_error(tmp_path, capsys):
    config = _write_config(tmp_path, "[params]\nlambda = -1.0\n")
    assert cli(["describe", "--config", str(config), "--out", str(tmp_path)]) == 2
    assert "params.lambda" in capsys.readouterr().err


def test_missing_config_file_is_usage_error(tmp_path):
    assert cli(["run", "--config", str(tmp_path / "absent.toml"), "--out", str(tmp_path)]) == 2


def test_verify_fails_under_drag_fault(tmp_path, tiny_config_text):
    config = _write_config(tmp_path, tiny_config_text)
    code = cli(["verify", "--config", str(config), "--out", str(tmp_path),
                "--set", "verify.fault=drag_sign"])
    assert code == 1
    text = (tmp_path / "invariants.txt").read_text(encoding="utf-8")
    assert "FAIL" in text and "drag_work" in text
