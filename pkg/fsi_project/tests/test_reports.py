import numpy as np
import pandas as pd
import pytest
from openpyxl import load_workbook

from core.grid import ScalarField, TensorField
from physics.phasefield import double_well
from reports.excel_templates import write_summary_workbook
from reports.scheduler import CheckpointScheduler, ScheduleConfig
from reports.series import SERIES_COLUMNS, read_csv_series, series_frame, write_csv_series
from reports.vtk_writer import write_vtk
from simulation.diagnostics import diagnostics_row
from simulation.state import SimState
from tests.helpers import random_velocity, rest_state


def _rows(grid, params, count=3):
    state = rest_state(grid, params)
    rows = []
    for k in range(count):
        row = diagnostics_row(state, None, params)
        row["t"] = k * 1e-3
        rows.append(row)
    return rows


def _block(text, name):
    block = text.split(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n", 1)[1].split("SCALARS", 1)[0]
    return np.array(block.split(), dtype=float)


def test_series_csv_columns_and_precision(tmp_path, grid, params):
    rows = _rows(grid, params)
    rows[1]["E_total"] = 0.1 + 0.2
    path = write_csv_series(rows, tmp_path / "series.csv")
    frame = read_csv_series(path)
    assert list(frame.columns) == SERIES_COLUMNS
    assert frame["t"].is_monotonic_increasing
    assert frame["E_total"][1] == 0.1 + 0.2


def test_series_carries_m_functional_and_addends(tmp_path, grid, params):
    x, y = grid.cell_coordinates()
    phi = ScalarField(grid, 0.5 + 0.1 * np.cos(np.pi * x) * np.cos(np.pi * y))
    state = SimState.initial(random_velocity(grid), phi, TensorField.identity(grid), params)
    path = write_csv_series([diagnostics_row(state, None, params)], tmp_path / "series.csv")
    frame = read_csv_series(path)
    addends = ["M_u_h2", "M_u_t", "M_bilap", "M_grad_lap_t"]
    for name in ["M"] + addends:
        assert name in frame.columns
    assert frame["M_u_h2"][0] > 0.0
    assert frame["M_bilap"][0] > 0.0
    assert frame["M_u_t"][0] == 0.0
    assert frame["M"][0] == pytest.approx(frame[addends].sum(axis=1)[0], rel=1e-12)


def test_empty_series_keeps_header():
    assert list(series_frame([]).columns) == SERIES_COLUMNS


def test_vtk_snapshot(tmp_path, grid, params):
    path = write_vtk(rest_state(grid, params, phi_value=0.25), params, tmp_path / "snap.vtk")
    text = path.read_text(encoding="ascii")
    assert text.startswith("# vtk DataFile Version 3.0")
    assert "DIMENSIONS 8 8 1" in text
    assert f"POINT_DATA {grid.size}" in text
    for name in ("phi", "p", "p_original", "mu", "u_magnitude", "u_x", "u_y", "trace_elastic", "det_F"):
        assert f"SCALARS {name} double 1" in text
    values = _block(text, "phi")
    assert values.size == grid.size
    np.testing.assert_allclose(values, 0.25)
    np.testing.assert_allclose(_block(text, "p_original"), params.lam * params.gamma * double_well(0.25, params.h))


def test_summary_workbook(tmp_path, grid, params):
    series = series_frame(_rows(grid, params))
    path = write_summary_workbook(tmp_path / "summary.xlsx", "Run test", {"steps": 2, "ok": True},
                                  {"series": series}, chart={"table": "series", "x": "t", "y": ["E_total"]})
    wb = load_workbook(path)
    assert wb.sheetnames == ["Summary", "series"]
    header = [c.value for c in wb["series"][1]]
    assert header == SERIES_COLUMNS
    labels = [c.value for c in wb["Summary"]["A"] if c.value is not None]
    assert "steps" in labels and "generated" in labels


def test_workbook_handles_non_finite(tmp_path):
    frame = pd.DataFrame({"t": [0.0, 1.0], "residual": [float("nan"), 1e-12]})
    path = write_summary_workbook(tmp_path / "nan.xlsx", "nan", {}, {"table": frame})
    assert load_workbook(path)["table"]["B2"].value == "nan"


def test_scheduler_flag_is_consumed_once():
    sched = CheckpointScheduler(ScheduleConfig(wall_minutes=0.0))
    assert not sched.config.enabled
    assert sched.consume() is False
    sched.trigger()
    assert sched.consume() is True
    assert sched.consume() is False
    assert sched.fired == 1


def test_disabled_scheduler_does_not_start():
    with CheckpointScheduler(ScheduleConfig(wall_minutes=0.0)) as sched:
        assert sched.running is False
        assert sched.scheduler is None


def test_enabled_scheduler_starts_and_stops():
    sched = CheckpointScheduler(ScheduleConfig(wall_minutes=60.0))
    with sched:
        assert sched.running
        assert sched.scheduler.get_job(CheckpointScheduler.JOB_ID) is not None
    assert not sched.running
