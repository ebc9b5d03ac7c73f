"""
Matrix-free linear solver plumbing.

Every system in the simulator is symmetric (positive semi-definite on the
relevant subspace) and is solved by preconditioned conjugate gradients from
``scipy.sparse.linalg``. Constant-coefficient operators built from
``laplace_neumann`` are diagonalised exactly by the DCT-II (mirror ghosts) or the
FFT (periodic), which gives the preconditioners used here.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import fft as sp_fft
from scipy.sparse.linalg import LinearOperator, cg

from core.errors import ConvergenceError
from core.grid import GridSpec
from utils.logging_conf import get_logger, log_solver_event

logger = get_logger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000


class SpectralLaplacian:
    """
    Exact eigen-decomposition of the discrete Neumann (or periodic) Laplacian.

    ``symbol`` holds the eigenvalue per transform mode (all <= 0; the constant
    mode has eigenvalue 0).
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        symbol = np.zeros(grid.shape)
        for a in range(grid.dim):
            n, h = grid.cells[a], grid.spacing[a]
            k = np.arange(n)
            theta = (2.0 * np.pi * k / n) if grid.periodic else (np.pi * k / n)
            lam = -(2.0 / h ** 2) * (1.0 - np.cos(theta))
            shape = [1] * grid.dim
            shape[a] = n
            symbol = symbol + lam.reshape(shape)
        self.symbol = symbol

    def forward(self, values: np.ndarray) -> np.ndarray:
        if self.grid.periodic:
            return sp_fft.fftn(values)
        return sp_fft.dctn(values, type=2, norm="ortho")

    def backward(self, coeffs: np.ndarray) -> np.ndarray:
        if self.grid.periodic:
            return np.real(sp_fft.ifftn(coeffs))
        return sp_fft.idctn(coeffs, type=2, norm="ortho")

    def apply_function(self, values: np.ndarray, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Apply g(Laplacian) to ``values``, with g evaluated on the symbol."""
        return self.backward(self.forward(values) * func(self.symbol))

    def solve(self, rhs: np.ndarray, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Solve g(Laplacian) x = rhs; modes where g vanishes are set to 0."""
        denom = func(self.symbol)
        safe = np.where(np.abs(denom) > 0.0, denom, 1.0)
        coeffs = np.where(np.abs(denom) > 0.0, self.forward(rhs) / safe, 0.0)
        return self.backward(coeffs)


@dataclass
class SolveInfo:
    iterations: int
    residual: float


def cg_solve(matvec: Callable[[np.ndarray], np.ndarray], rhs: np.ndarray,
             name: str, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
             precond: Optional[Callable[[np.ndarray], np.ndarray]] = None,
             x0: Optional[np.ndarray] = None, suggested_dt: Optional[float] = None,
             track_history: bool = False):
    """
    Preconditioned CG on flat vectors.

    Returns (solution, SolveInfo). Raises ConvergenceError carrying the final
    relative residual when ``max_iter`` is exhausted. With ``track_history`` the
    true relative residual of every iterate is recorded (one extra matvec each)
    and attached to the error.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    size = rhs.size
    b_norm = float(np.linalg.norm(rhs))
    if b_norm == 0.0:
        log_solver_event(name, "converged", 0, 0.0)
        return np.zeros_like(rhs), SolveInfo(0, 0.0)

    iterations = [0]
    history = []

    def _count(xk):
        iterations[0] += 1
        if track_history:
            history.append(float(np.linalg.norm(rhs - matvec(xk)) / b_norm))

    A = LinearOperator((size, size), matvec=matvec, dtype=np.float64)
    M = LinearOperator((size, size), matvec=precond, dtype=np.float64) if precond is not None else None
    x, info = cg(A, rhs, x0=x0, rtol=tol, atol=0.0, maxiter=max_iter, M=M, callback=_count)
    residual = float(np.linalg.norm(rhs - matvec(x)) / b_norm)

    if info > 0:
        log_solver_event(name, "failed", iterations[0], residual)
        raise ConvergenceError(
            f"{name} solve did not converge in {max_iter} iterations (residual {residual:.3e})",
            residual=residual, suggested_dt=suggested_dt, residual_history=history)
    if info < 0:
        log_solver_event(name, "failed", iterations[0], residual, info=info)
        raise ConvergenceError(f"{name} solve broke down (info={info})", residual=residual,
                               suggested_dt=suggested_dt, residual_history=history)

    log_solver_event(name, "converged", iterations[0], residual)
    return x, SolveInfo(iterations[0], residual)
