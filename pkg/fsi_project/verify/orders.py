"""
Observed order of accuracy from refinement data.
"""

from typing import List, Sequence, Tuple

import numpy as np

from utils.logging_conf import get_logger

logger = get_logger(__name__)


def observed_order(errors: Sequence[Tuple[float, float]]) -> float:
    """
    Least-squares slope of log(e) against log(h).

    Entries with a non-positive error (superconvergence or round-off noise)
    are dropped with a warning; nan when fewer than two usable entries remain.

    Raises:
        ValueError: fewer than two entries, or a non-positive h
    """
    if len(errors) < 2:
        raise ValueError("observed_order needs at least two (h, e) pairs")
    usable: List[Tuple[float, float]] = []
    for h, e in errors:
        if not h > 0:
            raise ValueError(f"refinement parameter must be positive, got {h}")
        if e > 0 and np.isfinite(e):
            usable.append((float(h), float(e)))
        else:
            logger.warning(f"⚠️ [Verify] error {e!r} at h={h:.3e} flagged as superconvergence/noise")
    if len(usable) < 2:
        return float("nan")
    h, e = np.log(np.array(usable)).T
    slope, _ = np.polyfit(h, e, 1)
    return float(slope)
