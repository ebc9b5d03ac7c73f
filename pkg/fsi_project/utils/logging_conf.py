#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Logging for the FSI simulator.

One root configuration (console and rotating file, UTC timestamps) plus
event helpers that write to fixed channels: ``solvers``, ``timeloop``,
``output`` and ``scheduler``. Modules take their own loggers from
``get_logger(__name__)``.
"""

import logging
import logging.handlers
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

DEFAULT_LOG_DIR = "logs"
DEFAULT_LOG_LEVEL = logging.INFO
MAX_LOG_FILE_SIZE = 10 * 1024 * 1024  # 10MB
BACKUP_COUNT = 5
LOG_FORMAT = '%(asctime)s | %(levelname)-8s | %(name)s | %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S UTC'

# Libraries that are noisy at INFO
QUIET_LOGGERS = ('numba', 'apscheduler')


class UTCFormatter(logging.Formatter):
    """Formatter stamping records in UTC regardless of the host timezone."""

    def formatTime(self, record, datefmt=None):
        stamp = datetime.fromtimestamp(record.created, tz=timezone.utc)
        return stamp.strftime(datefmt or DATE_FORMAT)


def setup_logging(
    log_level: int = DEFAULT_LOG_LEVEL,
    log_dir: str = DEFAULT_LOG_DIR,
    app_name: str = "fsi_sim",
    console_output: bool = True,
    file_output: bool = True
) -> logging.Logger:
    """
    Configure the root logger; replaces any handlers already attached.

    Args:
        log_level: Threshold for the root logger and every handler
        log_dir: Directory of the rotating ``<app_name>.log`` file
        app_name: Name of the returned application logger and of the log file
        console_output: Attach a stdout handler
        file_output: Attach a rotating file handler

    Returns:
        logging.Logger: The application logger
    """
    root = logging.getLogger()
    root.setLevel(log_level)
    root.handlers.clear()
    formatter = UTCFormatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT)

    handlers = []
    if console_output:
        handlers.append(logging.StreamHandler(sys.stdout))
    if file_output:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
        handlers.append(logging.handlers.RotatingFileHandler(
            os.path.join(log_dir, f"{app_name}.log"),
            maxBytes=MAX_LOG_FILE_SIZE,
            backupCount=BACKUP_COUNT,
            encoding='utf-8'
        ))
    for handler in handlers:
        handler.setLevel(log_level)
        handler.setFormatter(formatter)
        root.addHandler(handler)

    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    app_logger = logging.getLogger(app_name)
    app_logger.setLevel(log_level)
    return app_logger


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


def _emit(channel: str, message: str, status: str, details: Dict[str, Any],
          quiet: bool = False) -> None:
    """'failed' goes out as ERROR; everything else at INFO (DEBUG when ``quiet``)."""
    if details:
        message += ", " + ", ".join(f"{k}={v}" for k, v in details.items())
    logger = logging.getLogger(channel)
    if status == 'failed':
        logger.error(message)
    elif quiet:
        logger.debug(message)
    else:
        logger.info(message)


def log_solver_event(solver: str, status: str, iterations: int = 0,
                     residual: Optional[float] = None, **kwargs) -> None:
    """
    Linear or eigen solver outcome on the ``solvers`` channel.

    Args:
        solver: pressure, helmholtz, cahn_hilliard, stokes, lobpcg, ...
        status: converged / failed
        iterations: Iteration count
        residual: Final relative residual
    """
    message = f"Solver {solver} {status}: iterations={iterations}"
    if residual is not None:
        message += f", residual={residual:.3e}"
    _emit('solvers', message, status, kwargs, quiet=True)


def log_step_event(step: int, t: float, dt: float, **kwargs) -> None:
    """One completed step on the ``timeloop`` channel; float diagnostics in %.6e."""
    details = {k: (f"{v:.6e}" if isinstance(v, float) else v) for k, v in kwargs.items()}
    _emit('timeloop', f"Step {step}: t={t:.6e}, dt={dt:.3e}", 'completed', details)


def log_output_event(kind: str, path: str, status: str, **kwargs) -> None:
    """
    Output file event (vtk, csv, checkpoint, xlsx) on the ``output`` channel.

    Args:
        kind: Output kind
        path: Target path
        status: started / completed / failed
    """
    _emit('output', f"Output {status}: {kind} -> {path}", status, kwargs)


def log_scheduler_event(task_name: str, status: str, next_run: Optional[str] = None, **kwargs) -> None:
    message = f"Task {task_name} {status}"
    if next_run:
        message += f", next run: {next_run}"
    _emit('scheduler', message, status, kwargs)


LEVELS = {
    'DEBUG': logging.DEBUG,
    'INFO': logging.INFO,
    'WARNING': logging.WARNING,
    'ERROR': logging.ERROR,
    'CRITICAL': logging.CRITICAL,
}


def configure_logging_from_env() -> logging.Logger:
    """
    Configure logging from LOG_LEVEL, LOG_DIR and APP_ENV.

    APP_ENV=production logs to file only under the ``fsi_sim`` name; any other
    value adds console output and logs as ``fsi_sim_dev``.
    """
    level = LEVELS.get(os.getenv('LOG_LEVEL', 'INFO').upper(), logging.INFO)
    log_dir = os.getenv('LOG_DIR', DEFAULT_LOG_DIR)
    production = os.getenv('APP_ENV', 'development').lower() == 'production'
    return setup_logging(
        log_level=level,
        log_dir=log_dir,
        app_name="fsi_sim" if production else "fsi_sim_dev",
        console_output=not production,
        file_output=True
    )


def init_logging() -> logging.Logger:
    """Entry-point logging setup; call once from ``main``."""
    return configure_logging_from_env()
