#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Wall-clock checkpoint scheduling.

An APScheduler interval job raises a flag; the run loop consumes the flag
after the step in progress, so what gets written depends only on the step
index at which the flag is seen, never on a half-updated state.
"""

import threading
from dataclasses import dataclass
from typing import Optional

from apscheduler.schedulers.background import BackgroundScheduler
from apscheduler.triggers.interval import IntervalTrigger

from utils.logging_conf import get_logger, log_scheduler_event

logger = get_logger(__name__)


@dataclass
class ScheduleConfig:
    """Checkpoint cadence in wall-clock minutes (0 disables the scheduler)."""
    wall_minutes: float = 0.0

    @property
    def enabled(self) -> bool:
        return self.wall_minutes > 0


class CheckpointScheduler:
    """
    Raises a "checkpoint due" flag every ``wall_minutes``.

    Usage:
        with CheckpointScheduler(ScheduleConfig(wall_minutes=30)) as sched:
            while running:
                ...
                if sched.consume():
                    save_checkpoint(...)
    """

    JOB_ID = "wall_clock_checkpoint"

    def __init__(self, config: Optional[ScheduleConfig] = None):
        self.config = config or ScheduleConfig()
        self.scheduler: Optional[BackgroundScheduler] = None
        self.running = False
        self._due = threading.Event()
        self.fired = 0

    def _raise_flag(self) -> None:
        self.fired += 1
        self._due.set()
        log_scheduler_event(self.JOB_ID, "running", fired=self.fired)

    def trigger(self) -> None:
        """Raise the flag immediately (also what the interval job does)."""
        self._raise_flag()

    def consume(self) -> bool:
        """True once per raised flag."""
        if self._due.is_set():
            self._due.clear()
            return True
        return False

    def start(self) -> None:
        if self.running:
            logger.warning("⚠️ [Scheduler] Already running")
            return
        if not self.config.enabled:
            logger.debug("⏸️ [Scheduler] Wall-clock checkpoints disabled")
            return
        self.scheduler = BackgroundScheduler(timezone="UTC")
        self.scheduler.add_job(
            self._raise_flag,
            IntervalTrigger(seconds=self.config.wall_minutes * 60.0),
            id=self.JOB_ID,
            replace_existing=True,
            max_instances=1,
            coalesce=True,
        )
        self.scheduler.start()
        self.running = True
        job = self.scheduler.get_job(self.JOB_ID)
        next_run = str(job.next_run_time) if job is not None else None
        log_scheduler_event(self.JOB_ID, "scheduled", next_run=next_run,
                            every_minutes=self.config.wall_minutes)

    def stop(self) -> None:
        if not self.running:
            return
        self.running = False
        self.scheduler.shutdown(wait=False)
        log_scheduler_event(self.JOB_ID, "completed", fired=self.fired)

    def __enter__(self) -> "CheckpointScheduler":
        self.start()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.stop()
