#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Time utilities module for the simulator.
Provides UTC timestamps for output metadata and wall-clock phase timing for benchmarks.
"""

import time
from collections import defaultdict
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Dict, Iterator


def get_utc_now() -> datetime:
    """
    Get current datetime in UTC timezone.

    Returns:
        datetime: Current datetime in UTC timezone
    """
    return datetime.now(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    """
    Format datetime for report headers.

    Args:
        dt: Datetime to format

    Returns:
        str: Formatted datetime string
    """
    return dt.strftime('%Y-%m-%d %H:%M:%S UTC')


def format_duration(seconds: float) -> str:
    """Human-readable duration: '1h 02m 03.4s', '2m 05.0s' or '0.123s'."""
    if seconds < 60:
        return f"{seconds:.3f}s"
    minutes, sec = divmod(seconds, 60)
    if minutes < 60:
        return f"{int(minutes)}m {sec:04.1f}s"
    hours, minutes = divmod(minutes, 60)
    return f"{int(hours)}h {int(minutes):02d}m {sec:04.1f}s"


class PhaseTimer:
    """
    Accumulates wall-clock time per named phase.

    Usage:
        timer = PhaseTimer()
        with timer.phase("momentum"):
            ...
    """

    def __init__(self):
        self.totals: Dict[str, float] = defaultdict(float)
        self.counts: Dict[str, int] = defaultdict(int)

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.totals[name] += time.perf_counter() - start
            self.counts[name] += 1

    def reset(self) -> None:
        self.totals.clear()
        self.counts.clear()

    def as_dict(self) -> Dict[str, float]:
        return dict(self.totals)
