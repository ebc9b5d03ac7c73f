import logging
from datetime import timezone

import pytest

from utils.logging_conf import configure_logging_from_env, log_output_event, log_solver_event
from utils.time_utils import PhaseTimer, format_duration, format_timestamp, get_utc_now


@pytest.mark.parametrize("seconds, text", [
    (0.1234, "0.123s"),
    (125.0, "2m 05.0s"),
    (3723.4, "1h 02m 03.4s"),
])
def test_format_duration(seconds, text):
    assert format_duration(seconds) == text


def test_timestamps_are_utc():
    now = get_utc_now()
    assert now.tzinfo == timezone.utc
    assert format_timestamp(now).endswith(" UTC")


def test_phase_timer_accumulates():
    timer = PhaseTimer()
    for _ in range(3):
        with timer.phase("momentum"):
            pass
    assert timer.counts["momentum"] == 3
    assert set(timer.as_dict()) == {"momentum"}
    timer.reset()
    assert timer.as_dict() == {}


def test_failed_events_log_errors(caplog):
    with caplog.at_level(logging.DEBUG):
        log_output_event("vtk", "out/snapshot.vtk", "failed", error="disk full")
        log_solver_event("pressure", "failed", iterations=7, residual=1e-3)
    errors = [r for r in caplog.records if r.levelno == logging.ERROR]
    assert [r.name for r in errors] == ["output", "solvers"]
    assert "disk full" in errors[0].getMessage()
    assert "residual=1.000e-03" in errors[1].getMessage()


def test_production_env_logs_to_file_only(tmp_path, monkeypatch):
    monkeypatch.setenv("APP_ENV", "production")
    monkeypatch.setenv("LOG_LEVEL", "warning")
    monkeypatch.setenv("LOG_DIR", str(tmp_path))
    root = logging.getLogger()
    saved = (root.handlers[:], root.level)
    try:
        configure_logging_from_env()
        assert root.level == logging.WARNING
        assert len(root.handlers) == 1
        assert isinstance(root.handlers[0], logging.FileHandler)
    finally:
        for handler in root.handlers:
            handler.close()
        root.handlers[:] = saved[0]
        root.setLevel(saved[1])
