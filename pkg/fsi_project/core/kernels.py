"""
Upwind advective-derivative kernels (u . grad) for stacked cell fields.

Two backends: ``numpy`` (reference, always available) and ``numba`` (2-D,
``prange`` over x rows). The numba kernel performs the same floating-point
operations in the same order as the numpy path.
"""

from typing import Sequence

import numpy as np

from core.errors import ConfigurationError
from core.grid import GridSpec, pad_axis, _ax, _sl
from utils.logging_conf import get_logger

logger = get_logger(__name__)

try:
    from numba import njit, prange, set_num_threads, get_num_threads
    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False
    njit = None
    prange = range

BACKENDS = ("numpy", "numba")
_warned_fallback = False


def configure_threads(threads: int) -> int:
    """Set the numba worker count; returns the count in effect (1 without numba)."""
    if not NUMBA_AVAILABLE:
        return 1
    if threads and threads > 0:
        set_num_threads(int(threads))
    return int(get_num_threads())


def _upwind_numpy(values: np.ndarray, velocity: Sequence[np.ndarray], grid: GridSpec) -> np.ndarray:
    out = np.zeros_like(values)
    for a in range(grid.dim):
        padded = pad_axis(values, a, grid, "even")
        ax = _ax(padded, grid, a)
        n = padded.ndim
        h = grid.spacing[a]
        back = (values - padded[_sl(n, ax, slice(None, -2))]) / h
        fwd = (padded[_sl(n, ax, slice(2, None))] - values) / h
        ua = velocity[a]
        out += np.where(ua > 0, ua * back, ua * fwd)
    return out


if NUMBA_AVAILABLE:

    @njit(parallel=True, cache=True)
    def _upwind_numba_2d(values, uc, vc, hx, hy, periodic):
        m, nx, ny = values.shape
        out = np.empty_like(values)
        for i in prange(nx):
            if periodic:
                im = i - 1 if i > 0 else nx - 1
                ip = i + 1 if i < nx - 1 else 0
            else:
                im = i - 1 if i > 0 else 0
                ip = i + 1 if i < nx - 1 else nx - 1
            for j in range(ny):
                if periodic:
                    jm = j - 1 if j > 0 else ny - 1
                    jp = j + 1 if j < ny - 1 else 0
                else:
                    jm = j - 1 if j > 0 else 0
                    jp = j + 1 if j < ny - 1 else ny - 1
                u = uc[i, j]
                v = vc[i, j]
                for c in range(m):
                    f = values[c, i, j]
                    if u > 0:
                        tx = u * ((f - values[c, im, j]) / hx)
                    else:
                        tx = u * ((values[c, ip, j] - f) / hx)
                    if v > 0:
                        ty = v * ((f - values[c, i, jm]) / hy)
                    else:
                        ty = v * ((values[c, i, jp] - f) / hy)
                    out[c, i, j] = (0.0 + tx) + ty
        return out


def upwind_advective_derivative(values: np.ndarray, velocity: Sequence[np.ndarray],
                                grid: GridSpec, backend: str = "numpy") -> np.ndarray:
    """
    First-order upwind u . grad(values) at cell centres.

    Args:
        values: array of shape (..., *cells); leading axes are components
        velocity: cell-centred velocity components
        grid: grid description
        backend: "numpy" or "numba"
    """
    global _warned_fallback
    if backend not in BACKENDS:
        raise ConfigurationError(f"unknown backend '{backend}', expected one of {BACKENDS}")
    if backend == "numba" and grid.dim == 2:
        if NUMBA_AVAILABLE:
            lead = values.shape[:-2]
            stacked = np.ascontiguousarray(values.reshape((-1,) + grid.shape))
            out = _upwind_numba_2d(stacked, np.ascontiguousarray(velocity[0]),
                                   np.ascontiguousarray(velocity[1]),
                                   grid.spacing[0], grid.spacing[1], grid.periodic)
            return out.reshape(lead + grid.shape)
        if not _warned_fallback:
            logger.warning("⚠️ [Kernels] numba not installed - falling back to numpy backend")
            _warned_fallback = True
    return _upwind_numpy(values, velocity, grid)
