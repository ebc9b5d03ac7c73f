"""
Tabular outputs as CSV through pandas: the diagnostic time series and any
result table (MMS errors, invariant reports, bench rows, Galerkin studies).
"""

from pathlib import Path
from typing import Dict, Iterable, List, Sequence

import pandas as pd

from utils.logging_conf import get_logger, log_output_event

logger = get_logger(__name__)

SERIES_COLUMNS: List[str] = [
    "t", "dt", "mass", "E_total", "D_visc", "D_chem", "D_drag", "residual",
    "Z", "Z_grad_u", "Z_u_t", "Z_lap_phi", "Z_grad_phi_t", "Z_F_h2", "Z_F_t",
    "M", "M_u_h2", "M_u_t", "M_bilap", "M_grad_lap_t",
    "det_drift", "div_max",
]

# shortest repr that round-trips a double
FLOAT_FORMAT = "%.17g"


def series_frame(rows: Iterable[Dict[str, float]]) -> pd.DataFrame:
    """Diagnostic rows -> DataFrame with exactly the documented columns, in order."""
    frame = pd.DataFrame(list(rows))
    if frame.empty:
        return pd.DataFrame(columns=SERIES_COLUMNS)
    return frame.reindex(columns=SERIES_COLUMNS)


def write_table(frame: pd.DataFrame, path, kind: str = "table") -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        log_output_event(kind, str(path), "failed", error=e)
        raise
    log_output_event(kind, str(path), "completed", rows=len(frame))
    return path


def write_csv_series(rows: Sequence[Dict[str, float]], path) -> Path:
    return write_table(series_frame(rows), path, kind="series")


def read_csv_series(path) -> pd.DataFrame:
    return pd.read_csv(path)
