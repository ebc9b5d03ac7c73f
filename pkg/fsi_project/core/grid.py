"""
Rectangular grid, field containers and the discrete differential operators.

Layout is MAC (staggered): scalars and tensors live at cell centres, velocity
component ``a`` lives on the faces normal to axis ``a``. Arrays are indexed
``[i, j(, k)]`` with axis 0 = x. In physical mode a face array along axis ``a``
has ``n_a + 1`` entries on that axis (both walls included); in periodic mode it
has ``n_a`` entries, face ``i`` sitting on the low side of cell ``i``.

All operators are pure: inputs are never modified and every result is a fresh
array. Ghost layers are width 1 and are built on the fly (``pad_axis``).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Sequence, Tuple

import numpy as np

from core.errors import ConfigurationError
from utils.logging_conf import get_logger

logger = get_logger(__name__)

MIN_CELLS = 4


class BCMode(str, Enum):
    """Boundary handling: no-slip walls with Neumann scalars, or fully periodic."""
    PHYSICAL = "physical"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class GridSpec:
    """Uniform box grid of ``cells`` over ``extents``."""
    extents: Tuple[float, ...]
    cells: Tuple[int, ...]
    bc_mode: BCMode = BCMode.PHYSICAL

    def __post_init__(self):
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        object.__setattr__(self, "cells", tuple(int(n) for n in self.cells))
        object.__setattr__(self, "bc_mode", BCMode(self.bc_mode))
        problems = []
        if len(self.extents) not in (2, 3):
            problems.append(f"dim must be 2 or 3, got {len(self.extents)}")
        if len(self.extents) != len(self.cells):
            problems.append("extents and cells must have the same length")
        if any(not np.isfinite(e) or e <= 0 for e in self.extents):
            problems.append(f"extents must be positive, got {self.extents}")
        if any(n < MIN_CELLS for n in self.cells):
            problems.append(f"cell counts must be >= {MIN_CELLS}, got {self.cells}")
        if problems:
            raise ConfigurationError("invalid grid: " + "; ".join(problems))

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.extents, self.cells))

    @property
    def min_spacing(self) -> float:
        return min(self.spacing)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def periodic(self) -> bool:
        return self.bc_mode is BCMode.PERIODIC

    def face_shape(self, axis: int) -> Tuple[int, ...]:
        shape = list(self.cells)
        if not self.periodic:
            shape[axis] += 1
        return tuple(shape)

    def cell_centers(self, axis: int) -> np.ndarray:
        return (np.arange(self.cells[axis]) + 0.5) * self.spacing[axis]

    def face_positions(self, axis: int) -> np.ndarray:
        count = self.cells[axis] if self.periodic else self.cells[axis] + 1
        return np.arange(count) * self.spacing[axis]

    def cell_coordinates(self) -> List[np.ndarray]:
        axes = [self.cell_centers(a) for a in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")

    def face_coordinates(self, axis: int) -> List[np.ndarray]:
        axes = [self.face_positions(a) if a == axis else self.cell_centers(a)
                for a in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")

    def with_cells(self, cells: Sequence[int]) -> "GridSpec":
        return GridSpec(self.extents, tuple(cells), self.bc_mode)


def require_same_grid(*grids: GridSpec) -> None:
    first = grids[0]
    for other in grids[1:]:
        if other != first:
            raise ConfigurationError(f"grid mismatch: {first} vs {other}")


# ---------------------------------------------------------------------------
# Field containers
# ---------------------------------------------------------------------------

@dataclass
class ScalarField:
    """Cell-centred scalar (phi, mu, p and work buffers)."""
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ConfigurationError(
                f"scalar shape {self.values.shape} does not match grid {self.grid.shape}")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def full(cls, grid: GridSpec, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: GridSpec, func: Callable[..., np.ndarray]) -> "ScalarField":
        coords = grid.cell_coordinates()
        return cls(grid, np.broadcast_to(func(*coords), grid.shape).astype(np.float64))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def with_ghosts(self) -> np.ndarray:
        """Values padded by one ghost cell per side (mirror or wrap)."""
        mode = "wrap" if self.grid.periodic else "edge"
        return np.pad(self.values, 1, mode=mode)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


@dataclass
class MacVelocity:
    """Face-centred velocity; component ``a`` lives on faces normal to axis ``a``."""
    grid: GridSpec
    components: Tuple[np.ndarray, ...]

    def __post_init__(self):
        comps = tuple(np.asarray(c, dtype=np.float64) for c in self.components)
        if len(comps) != self.grid.dim:
            raise ConfigurationError(f"expected {self.grid.dim} velocity components, got {len(comps)}")
        for a, comp in enumerate(comps):
            if comp.shape != self.grid.face_shape(a):
                raise ConfigurationError(
                    f"component {a} shape {comp.shape} does not match faces {self.grid.face_shape(a)}")
        self.components = comps

    @classmethod
    def zeros(cls, grid: GridSpec) -> "MacVelocity":
        return cls(grid, tuple(np.zeros(grid.face_shape(a)) for a in range(grid.dim)))

    @classmethod
    def from_functions(cls, grid: GridSpec, funcs: Sequence[Callable[..., np.ndarray]]) -> "MacVelocity":
        comps = []
        for a in range(grid.dim):
            coords = grid.face_coordinates(a)
            comps.append(np.broadcast_to(funcs[a](*coords), grid.face_shape(a)).astype(np.float64))
        return cls(grid, tuple(comps)).with_no_penetration()

    def copy(self) -> "MacVelocity":
        return MacVelocity(self.grid, tuple(c.copy() for c in self.components))

    def with_no_penetration(self) -> "MacVelocity":
        """Copy with wall-normal boundary faces set to 0 (physical mode only)."""
        return MacVelocity(self.grid, tuple(zero_boundary_faces(c, a, self.grid)
                                            for a, c in enumerate(self.components)))

    def scaled(self, factor: float) -> "MacVelocity":
        return MacVelocity(self.grid, tuple(factor * c for c in self.components))

    def plus(self, other: "MacVelocity", factor: float = 1.0) -> "MacVelocity":
        require_same_grid(self.grid, other.grid)
        return MacVelocity(self.grid, tuple(a + factor * b
                                            for a, b in zip(self.components, other.components)))

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(c))) if c.size else 0.0 for c in self.components)

    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(c))) for c in self.components)

    def flatten(self) -> np.ndarray:
        return np.concatenate([c.ravel() for c in self.components])

    @classmethod
    def unflatten(cls, grid: GridSpec, vector: np.ndarray) -> "MacVelocity":
        comps, offset = [], 0
        for a in range(grid.dim):
            shape = grid.face_shape(a)
            count = int(np.prod(shape))
            comps.append(np.asarray(vector[offset:offset + count]).reshape(shape))
            offset += count
        return cls(grid, tuple(comps))


@dataclass
class TensorField:
    """d x d tensor per cell, ``values[i, j]`` = F^{ij} (row-major components)."""
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        d = self.grid.dim
        expected = (d, d) + self.grid.shape
        if self.values.shape != expected:
            raise ConfigurationError(f"tensor shape {self.values.shape} does not match {expected}")

    @classmethod
    def identity(cls, grid: GridSpec) -> "TensorField":
        return cls.constant(grid, np.eye(grid.dim))

    @classmethod
    def constant(cls, grid: GridSpec, matrix) -> "TensorField":
        matrix = np.asarray(matrix, dtype=np.float64)
        values = np.empty((grid.dim, grid.dim) + grid.shape)
        values[...] = matrix.reshape((grid.dim, grid.dim) + (1,) * grid.dim)
        return cls(grid, values)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "TensorField":
        return cls(grid, np.zeros((grid.dim, grid.dim) + grid.shape))

    def copy(self) -> "TensorField":
        return TensorField(self.grid, self.values.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def cellwise_matrices(self) -> np.ndarray:
        """View with the matrix axes last: shape (*cells, d, d)."""
        return np.moveaxis(self.values, (0, 1), (-2, -1))


# ---------------------------------------------------------------------------
# Raw-array stencils (axis is the spatial axis; leading component axes allowed)
# ---------------------------------------------------------------------------

def _ax(values: np.ndarray, grid: GridSpec, axis: int) -> int:
    return values.ndim - grid.dim + axis


def _sl(ndim: int, ax: int, sl: slice) -> tuple:
    index = [slice(None)] * ndim
    index[ax] = sl
    return tuple(index)


def zero_boundary_faces(faces: np.ndarray, axis: int, grid: GridSpec) -> np.ndarray:
    out = np.array(faces, dtype=np.float64, copy=True)
    if not grid.periodic:
        ax = _ax(out, grid, axis)
        out[_sl(out.ndim, ax, slice(0, 1))] = 0.0
        out[_sl(out.ndim, ax, slice(-1, None))] = 0.0
    return out


def pad_axis(values: np.ndarray, axis: int, grid: GridSpec, kind: str = "even") -> np.ndarray:
    """
    One ghost layer on each side of ``axis``.

    kind: "even" mirrors the boundary value (homogeneous Neumann), "odd" negates it
    (value 0 midway to the ghost, used for tangential no-slip), "zero" pads zeros.
    Periodic grids always wrap.
    """
    ax = _ax(values, grid, axis)
    width = [(0, 0)] * values.ndim
    width[ax] = (1, 1)
    if grid.periodic:
        return np.pad(values, width, mode="wrap")
    if kind == "even":
        return np.pad(values, width, mode="edge")
    if kind == "zero":
        return np.pad(values, width)
    if kind == "odd":
        padded = np.pad(values, width, mode="edge")
        padded[_sl(padded.ndim, ax, slice(0, 1))] *= -1.0
        padded[_sl(padded.ndim, ax, slice(-1, None))] *= -1.0
        return padded
    raise ValueError(f"unknown ghost kind '{kind}'")


def face_difference(values: np.ndarray, axis: int, grid: GridSpec) -> np.ndarray:
    """Cells -> faces: (s_i - s_{i-1}) / h; wall faces get 0 (Neumann mirror)."""
    ax = _ax(values, grid, axis)
    h = grid.spacing[axis]
    if grid.periodic:
        return (values - np.roll(values, 1, axis=ax)) / h
    interior = np.diff(values, axis=ax) / h
    width = [(0, 0)] * values.ndim
    width[ax] = (1, 1)
    return np.pad(interior, width)


def cell_difference(faces: np.ndarray, axis: int, grid: GridSpec) -> np.ndarray:
    """Faces -> cells: (f_{i+1} - f_i) / h."""
    ax = _ax(faces, grid, axis)
    h = grid.spacing[axis]
    if grid.periodic:
        return (np.roll(faces, -1, axis=ax) - faces) / h
    return np.diff(faces, axis=ax) / h


def cell_to_face_average(values: np.ndarray, axis: int, grid: GridSpec) -> np.ndarray:
    """Two-point average onto faces; wall faces take the adjacent cell value."""
    ax = _ax(values, grid, axis)
    if grid.periodic:
        return 0.5 * (values + np.roll(values, 1, axis=ax))
    n = values.ndim
    interior = 0.5 * (values[_sl(n, ax, slice(None, -1))] + values[_sl(n, ax, slice(1, None))])
    return np.concatenate([values[_sl(n, ax, slice(0, 1))], interior,
                           values[_sl(n, ax, slice(-1, None))]], axis=ax)


def face_to_cell_average(faces: np.ndarray, axis: int, grid: GridSpec) -> np.ndarray:
    ax = _ax(faces, grid, axis)
    if grid.periodic:
        return 0.5 * (faces + np.roll(faces, -1, axis=ax))
    n = faces.ndim
    return 0.5 * (faces[_sl(n, ax, slice(None, -1))] + faces[_sl(n, ax, slice(1, None))])


def centered_difference(values: np.ndarray, axis: int, grid: GridSpec, kind: str = "even") -> np.ndarray:
    """Cell-centred central difference with ghost handling ``kind``."""
    padded = pad_axis(values, axis, grid, kind)
    ax = _ax(padded, grid, axis)
    n = padded.ndim
    return (padded[_sl(n, ax, slice(2, None))] - padded[_sl(n, ax, slice(None, -2))]) / (2.0 * grid.spacing[axis])


def one_sided_gradient(values: np.ndarray, axis: int, grid: GridSpec) -> np.ndarray:
    """Central in the interior, one-sided first order at walls (used for norms)."""
    ax = _ax(values, grid, axis)
    if grid.periodic:
        return (np.roll(values, -1, axis=ax) - np.roll(values, 1, axis=ax)) / (2.0 * grid.spacing[axis])
    return np.gradient(values, grid.spacing[axis], axis=ax, edge_order=1)


def upwind_face_values(values: np.ndarray, face_velocity: np.ndarray, axis: int,
                       grid: GridSpec) -> np.ndarray:
    """Upwind cell value on each face; 0 on wall faces."""
    ax = _ax(values, grid, axis)
    n = values.ndim
    if grid.periodic:
        return np.where(face_velocity > 0, np.roll(values, 1, axis=ax), values)
    left = values[_sl(n, ax, slice(None, -1))]
    right = values[_sl(n, ax, slice(1, None))]
    vel = face_velocity[_sl(face_velocity.ndim, axis, slice(1, -1))]
    interior = np.where(vel > 0, left, right)
    width = [(0, 0)] * n
    width[ax] = (1, 1)
    return np.pad(interior, width)


def inner_cells(a: np.ndarray, b: np.ndarray, grid: GridSpec) -> float:
    return float(np.sum(a * b) * grid.cell_volume)


def inner_faces(v: MacVelocity, w: MacVelocity) -> float:
    require_same_grid(v.grid, w.grid)
    return float(sum(np.sum(a * b) for a, b in zip(v.components, w.components)) * v.grid.cell_volume)


def norm_faces_sq(v: MacVelocity) -> float:
    return inner_faces(v, v)


# ---------------------------------------------------------------------------
# Field-level operators
# ---------------------------------------------------------------------------

def divergence(v: MacVelocity) -> ScalarField:
    grid = v.grid
    out = np.zeros(grid.shape)
    for a, comp in enumerate(v.components):
        out += cell_difference(comp, a, grid)
    return ScalarField(grid, out)


def gradient_to_faces(s: ScalarField) -> MacVelocity:
    grid = s.grid
    return MacVelocity(grid, tuple(face_difference(s.values, a, grid) for a in range(grid.dim)))


def laplace_neumann(s: ScalarField) -> ScalarField:
    """5/7-point Laplacian with mirrored ghosts, equal to div(grad s)."""
    return divergence(gradient_to_faces(s))


def laplace_values(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """``laplace_neumann`` on a raw array, leading component axes allowed."""
    out = np.zeros_like(values, dtype=np.float64)
    for a in range(grid.dim):
        out += cell_difference(face_difference(values, a, grid), a, grid)
    return out


def advect_scalar_conservative(v: MacVelocity, s: ScalarField) -> ScalarField:
    """First-order upwind flux divergence div(v s)."""
    require_same_grid(v.grid, s.grid)
    grid = s.grid
    out = np.zeros(grid.shape)
    for a, comp in enumerate(v.components):
        flux = comp * upwind_face_values(s.values, comp, a, grid)
        out += cell_difference(flux, a, grid)
    return ScalarField(grid, out)


def mean_value(s: ScalarField) -> float:
    """Cell-volume weighted average (uniform cells)."""
    return float(np.mean(s.values))


def interpolate_face_to_cell(v: MacVelocity) -> List[ScalarField]:
    grid = v.grid
    return [ScalarField(grid, face_to_cell_average(c, a, grid)) for a, c in enumerate(v.components)]


def interpolate_cell_to_face(s: ScalarField) -> MacVelocity:
    grid = s.grid
    return MacVelocity(grid, tuple(cell_to_face_average(s.values, a, grid) for a in range(grid.dim)))
