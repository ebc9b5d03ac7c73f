"""
Discrete eigenbases for the spectral Galerkin approximation.

Three symmetric operators, each on its own unknowns:

    stokes          -Lap on velocity faces, restricted to discretely
                    divergence-free fields (no-slip or periodic)
    neumann_scalar  -Lap + I on cell scalars (mirror ghosts)
    tensor          -Lap + I componentwise on d x d cell tensors

Basis vectors are orthonormal in the cell-volume weighted inner product used
everywhere else (``inner_cells`` / ``inner_faces``), eigenvalues ascending.
Small problems are diagonalised densely; larger ones use LOBPCG.
"""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Tuple

import numpy as np
from scipy.linalg import eigh, null_space
from scipy.sparse.linalg import LinearOperator, lobpcg

from core.errors import ConfigurationError, ConvergenceError
from core.grid import GridSpec, MacVelocity, ScalarField, TensorField, divergence, laplace_values
from core.solvers import SpectralLaplacian
from physics.momentum import ViscousOperator, interior_mask, project
from simulation.checkpoint import CheckpointError, read_grid_header, write_grid_header
from utils.logging_conf import get_logger, log_solver_event

logger = get_logger(__name__)

KINDS = ("stokes", "neumann_scalar", "tensor")
DENSE_LIMIT = 2500


@dataclass
class EigenBasis:
    kind: str
    grid: GridSpec
    eigenvalues: np.ndarray
    vectors: np.ndarray

    @property
    def size(self) -> int:
        return int(self.eigenvalues.size)

    def project(self, flat: np.ndarray) -> np.ndarray:
        """Coefficients <f, e_k> of a flat field vector."""
        return self.grid.cell_volume * (self.vectors.T @ np.asarray(flat, dtype=np.float64))

    def lift(self, coeffs: np.ndarray) -> np.ndarray:
        return self.vectors @ np.asarray(coeffs, dtype=np.float64)

    def gram_error(self) -> float:
        gram = self.grid.cell_volume * (self.vectors.T @ self.vectors)
        return float(np.max(np.abs(gram - np.eye(self.size)))) if self.size else 0.0

    def truncated(self, n: int) -> "EigenBasis":
        return EigenBasis(self.kind, self.grid, self.eigenvalues[:n].copy(), self.vectors[:, :n].copy())


# ---------------------------------------------------------------------------
# Field <-> flat vector
# ---------------------------------------------------------------------------

def field_vector(kind: str, field) -> np.ndarray:
    if kind == "stokes":
        return field.flatten()
    return np.asarray(field.values, dtype=np.float64).ravel()


def vector_field(kind: str, grid: GridSpec, vector: np.ndarray):
    if kind == "stokes":
        return MacVelocity.unflatten(grid, vector)
    if kind == "neumann_scalar":
        return ScalarField(grid, np.asarray(vector).reshape(grid.shape))
    return TensorField(grid, np.asarray(vector).reshape((grid.dim, grid.dim) + grid.shape))


def available_dimension(kind: str, grid: GridSpec) -> int:
    if kind == "neumann_scalar":
        return grid.size
    if kind == "tensor":
        return grid.dim ** 2 * grid.size
    faces = sum(int(np.count_nonzero(interior_mask(grid, a))) for a in range(grid.dim))
    # divergence has rank size - 1 (constants are its cokernel)
    return faces - (grid.size - 1)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

def _shifted_laplacian(grid: GridSpec) -> Callable[[np.ndarray], np.ndarray]:
    def apply(x):
        values = np.asarray(x).reshape(grid.shape)
        return (values - laplace_values(values, grid)).ravel()
    return apply


def _interior_indices(grid: GridSpec) -> np.ndarray:
    return np.flatnonzero(np.concatenate([interior_mask(grid, a).ravel() for a in range(grid.dim)]))


def _vector_laplacian(grid: GridSpec) -> Callable[[np.ndarray], np.ndarray]:
    viscous = ViscousOperator(grid, np.ones(grid.shape))

    def apply(flat):
        comps = MacVelocity.unflatten(grid, flat).components
        return -np.concatenate([viscous.apply_component(c, i).ravel() for i, c in enumerate(comps)])
    return apply


def _dense_matrix(apply: Callable[[np.ndarray], np.ndarray], size: int) -> np.ndarray:
    matrix = np.empty((size, size))
    unit = np.zeros(size)
    for k in range(size):
        unit[k] = 1.0
        matrix[:, k] = apply(unit)
        unit[k] = 0.0
    return 0.5 * (matrix + matrix.T)


def _lobpcg(apply, size: int, n: int, tol: float, precond=None, max_iter: int = 500,
            name: str = "lobpcg") -> Tuple[np.ndarray, np.ndarray]:
    A = LinearOperator((size, size), matvec=apply, dtype=np.float64)
    M = LinearOperator((size, size), matvec=precond, dtype=np.float64) if precond is not None else None
    rng = np.random.default_rng(0)
    X = rng.standard_normal((size, n))
    values, vectors = lobpcg(A, X, M=M, tol=tol, maxiter=max_iter, largest=False)
    order = np.argsort(values)
    values, vectors = values[order], vectors[:, order]
    residual = max(float(np.linalg.norm(apply(vectors[:, k]) - values[k] * vectors[:, k]))
                   / max(1.0, abs(values[k])) for k in range(n))
    if residual > tol:
        log_solver_event(name, "failed", max_iter, residual, modes=n)
        raise ConvergenceError(f"{name}: {n} eigenpairs not converged (residual {residual:.3e})",
                               residual=residual)
    log_solver_event(name, "converged", max_iter, residual, modes=n)
    return values, vectors


def _scalar_pairs(grid: GridSpec, n: int, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Leading n eigenpairs of -Lap + I, Euclidean-orthonormal."""
    size = grid.size
    apply = _shifted_laplacian(grid)
    if size <= DENSE_LIMIT or 5 * n >= size:
        values, vectors = eigh(_dense_matrix(apply, size), subset_by_index=[0, n - 1])
        return values, vectors
    spectral = SpectralLaplacian(grid)

    def precond(r):
        return spectral.solve(np.asarray(r).reshape(grid.shape), lambda k: 1.0 - k).ravel()

    return _lobpcg(apply, size, n, tol, precond, name="neumann_scalar")


def _stokes_pairs(grid: GridSpec, n: int, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Leading n eigenpairs of -Lap on divergence-free faces, embedded in the full face vector."""
    total = sum(int(np.prod(grid.face_shape(a))) for a in range(grid.dim))
    interior = _interior_indices(grid)
    laplacian = _vector_laplacian(grid)

    def embed(x):
        full = np.zeros(total)
        full[interior] = x
        return full

    if interior.size <= DENSE_LIMIT or 5 * n >= interior.size:
        A = _dense_matrix(lambda x: laplacian(embed(x))[interior], interior.size)
        D = np.empty((grid.size, interior.size))
        unit = np.zeros(interior.size)
        for k in range(interior.size):
            unit[k] = 1.0
            D[:, k] = divergence(MacVelocity.unflatten(grid, embed(unit))).values.ravel()
            unit[k] = 0.0
        Z = null_space(D)
        B = Z.T @ A @ Z
        values, Y = eigh(0.5 * (B + B.T), subset_by_index=[0, n - 1])
        vectors = np.stack([embed(col) for col in (Z @ Y).T], axis=1)
        return values, vectors

    def leray(x):
        return project(MacVelocity.unflatten(grid, x), rho=1.0, dt=1.0, tol=1e-13)[0].flatten()

    # gradient fields are pushed above the wanted part of the spectrum
    sigma = 8.0 * sum(1.0 / h ** 2 for h in grid.spacing) * grid.dim

    def apply(x):
        px = leray(x)
        return leray(laplacian(px)) + sigma * (x - px)

    return _lobpcg(apply, total, n, tol, name="stokes")


def build_basis(kind: str, n: int, grid: GridSpec, tol: float = 1e-8) -> EigenBasis:
    """
    Leading ``n`` eigenpairs of the ``kind`` operator (n = 0 means every mode).

    Raises:
        ConfigurationError: unknown kind or n above the discrete dimension
        ConvergenceError: the iterative eigensolver missed ``tol``
    """
    if kind not in KINDS:
        raise ConfigurationError(f"unknown basis kind '{kind}', expected one of {KINDS}")
    limit = available_dimension(kind, grid)
    n = limit if n == 0 else n
    if n < 1 or n > limit:
        raise ConfigurationError(f"{kind} basis: n={n} outside [1, {limit}]")

    if kind == "neumann_scalar":
        values, vectors = _scalar_pairs(grid, n, tol)
    elif kind == "stokes":
        values, vectors = _stokes_pairs(grid, n, tol)
    else:
        values, vectors = _tensor_pairs(grid, n, tol)

    basis = EigenBasis(kind, grid, np.asarray(values, dtype=np.float64),
                       np.asarray(vectors, dtype=np.float64) / np.sqrt(grid.cell_volume))
    logger.info(f"🧮 [Galerkin] {kind} basis: {n} modes, "
                f"lambda in [{basis.eigenvalues[0]:.4g}, {basis.eigenvalues[-1]:.4g}]")
    return basis


def _tensor_pairs(grid: GridSpec, n: int, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Scalar modes copied into each of the d^2 components, ordered by (eigenvalue, mode, component)."""
    d2 = grid.dim ** 2
    scalar_n = min(grid.size, -(-n // d2))
    values, vectors = _scalar_pairs(grid, scalar_n, tol)
    size = grid.size
    out_values, out_vectors = [], []
    for k in range(scalar_n):
        for c in range(d2):
            column = np.zeros(d2 * size)
            column[c * size:(c + 1) * size] = vectors[:, k]
            out_values.append(values[k])
            out_vectors.append(column)
    return np.array(out_values[:n]), np.stack(out_vectors[:n], axis=1)


# ---------------------------------------------------------------------------
# Cache file: grid header as in checkpoints, then kind, n, eigenvalues, vectors
# ---------------------------------------------------------------------------

def save_basis(basis: EigenBasis, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    kind = basis.kind.encode("ascii")
    with open(path, "wb") as stream:
        write_grid_header(stream, basis.grid)
        stream.write(struct.pack("<I", len(kind)))
        stream.write(kind)
        stream.write(struct.pack("<QQ", basis.vectors.shape[0], basis.size))
        stream.write(np.ascontiguousarray(basis.eigenvalues, dtype="<f8").tobytes())
        stream.write(np.ascontiguousarray(basis.vectors, dtype="<f8").tobytes())
    logger.debug(f"[Galerkin] basis cache written: {path}")
    return path


def load_basis(path) -> EigenBasis:
    path = Path(path)
    with open(path, "rb") as stream:
        grid = read_grid_header(stream)
        (length,) = struct.unpack("<I", stream.read(4))
        kind = stream.read(length).decode("ascii")
        rows, n = struct.unpack("<QQ", stream.read(16))
        values = np.frombuffer(stream.read(8 * n), dtype="<f8").astype(np.float64)
        raw = stream.read(8 * rows * n)
        if len(raw) != 8 * rows * n or values.size != n:
            raise CheckpointError(f"truncated basis cache {path}")
        vectors = np.frombuffer(raw, dtype="<f8").reshape(rows, n).astype(np.float64)
    if kind not in KINDS:
        raise CheckpointError(f"basis cache {path}: unknown kind '{kind}'")
    return EigenBasis(kind, grid, values, vectors)


def cached_basis(kind: str, n: int, grid: GridSpec, tol: float, cache_dir=None) -> EigenBasis:
    """``build_basis`` through an optional on-disk cache keyed by kind, grid and n."""
    if not cache_dir:
        return build_basis(kind, n, grid, tol)
    cells = "x".join(str(c) for c in grid.cells)
    path = Path(cache_dir) / f"{kind}_{cells}_{grid.bc_mode.value}_{n}.basis"
    if path.exists():
        basis = load_basis(path)
        if basis.grid == grid:
            return basis
        logger.warning(f"⚠️ [Galerkin] cache {path} is for another grid, rebuilding")
    basis = build_basis(kind, n, grid, tol)
    save_basis(basis, path)
    return basis
