import pytest

from config.settings import parse_config
from core.errors import CflViolation
from reports.series import SERIES_COLUMNS, read_csv_series
from simulation.checkpoint import load_checkpoint
from simulation.runner import next_dt, run, threads_setting
from tests.helpers import rest_state


def test_rest_run_writes_outputs(tmp_path, tiny_config):
    result = run(tiny_config, tmp_path)
    assert result.ok
    for name in ("series.csv", "final.pfsi", "config.toml", "summary.xlsx"):
        assert (tmp_path / name).exists(), name
    series = read_csv_series(tmp_path / "series.csv")
    assert list(series.columns) == SERIES_COLUMNS
    assert len(series) == 3
    assert series["t"].iloc[-1] == pytest.approx(2e-3)
    assert result.state.n == 2
    assert (series["residual"].abs() < 1e-8).all()
    assert parse_config((tmp_path / "config.toml").read_text()).sections == tiny_config.sections


def test_zero_horizon_echoes_initial_state(tmp_path, tiny_config_text):
    config = parse_config(tiny_config_text, ["time.t_end=0.0", "output.excel=false"])
    result = run(config, tmp_path)
    assert result.state.n == 0
    assert len(result.series) == 1
    assert not (tmp_path / "summary.xlsx").exists()
    state, _ = load_checkpoint(tmp_path / "final.pfsi")
    assert state.n == 0 and state.t == 0.0


def test_restart_from_checkpoint_is_bit_exact(tmp_path, tiny_config_text):
    overrides = ["initial.preset=spinodal", "time.t_end=4e-3", "output.checkpoint_every=2",
                 "output.excel=false"]
    full = parse_config(tiny_config_text, overrides)
    run(full, tmp_path / "full")
    checkpoint = tmp_path / "full" / "checkpoint_000002.pfsi"
    assert checkpoint.exists()

    resumed = parse_config(tiny_config_text, overrides + [
        "initial.preset=checkpoint", f"initial.checkpoint=\"{checkpoint.as_posix()}\""])
    result = run(resumed, tmp_path / "resumed")
    assert result.state.n == 4
    assert ((tmp_path / "full" / "final.pfsi").read_bytes()
            == (tmp_path / "resumed" / "final.pfsi").read_bytes())


def test_vtk_cadence(tmp_path, tiny_config_text):
    config = parse_config(tiny_config_text, ["output.vtk_every=1", "output.excel=false"])
    run(config, tmp_path)
    assert sorted(p.name for p in tmp_path.glob("snapshot_*.vtk")) == [
        "snapshot_000001.vtk", "snapshot_000002.vtk"]


def test_cfl_failure_still_writes_final_state(tmp_path, tiny_config_text):
    config = parse_config(tiny_config_text, ["initial.preset=swirl", "initial.velocity=1000.0",
                                             "time.dt=0.1", "time.t_end=0.2", "output.excel=false"])
    with pytest.raises(CflViolation):
        run(config, tmp_path)
    assert (tmp_path / "final.pfsi").exists()
    assert len(read_csv_series(tmp_path / "series.csv")) == 1


def test_next_dt_policies(grid, params, tiny_config_text):
    state = rest_state(grid, params)
    fixed = parse_config(tiny_config_text, ["time.t_end=5e-4"])
    assert next_dt(state, params, fixed) == 5e-4
    cfl = parse_config(tiny_config_text, ["time.dt_policy=cfl", "time.dt_max=2e-4"])
    assert next_dt(state, params, cfl) == 2e-4


def test_threads_setting_reads_environment(monkeypatch, tiny_config):
    monkeypatch.setenv("FSI_THREADS", "3")
    assert threads_setting(tiny_config) == 3
    monkeypatch.delenv("FSI_THREADS")
    assert threads_setting(tiny_config) == 0
