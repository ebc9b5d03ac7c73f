"""
Binary checkpoint files.

Layout (all little-endian):

    b"PFSI"                      magic
    u32  version                 (1)
    u32  dim
    u32  bc_mode                 0 physical, 1 periodic
    u32  cells[dim]
    f64  extents[dim]
    u32  params_len, bytes       ModelParams as canonical JSON (sorted keys)
    f64  t
    u64  n
    f64  dt_prev
    f64  arrays, C order, in declaration order:
         u[0..dim-1], p, phi, mu, F, u_prev[0..dim-1], phi_prev, F_prev

Writing the state read back from a file reproduces that file byte for byte.
"""

import json
import struct
from pathlib import Path
from typing import BinaryIO, Iterable, List, Tuple

import numpy as np

from core.errors import FsiError
from core.grid import BCMode, GridSpec, MacVelocity, ScalarField, TensorField
from physics.params import ModelParams
from simulation.state import SimState
from utils.logging_conf import get_logger, log_output_event

logger = get_logger(__name__)

MAGIC = b"PFSI"
VERSION = 1


class CheckpointError(FsiError):
    """Unreadable or incompatible checkpoint file."""


def _arrays(state: SimState) -> Iterable[np.ndarray]:
    yield from state.u.components
    yield state.p.values
    yield state.phi.values
    yield state.mu.values
    yield state.F.values
    yield from state.u_prev.components
    yield state.phi_prev.values
    yield state.F_prev.values


def encode_params(params: ModelParams) -> bytes:
    return json.dumps(params.as_dict(), sort_keys=True, separators=(",", ":")).encode("utf-8")


def decode_params(blob: bytes) -> ModelParams:
    data = json.loads(blob.decode("utf-8"))
    data["eta_range"] = tuple(data["eta_range"])
    data["kappa_range"] = tuple(data["kappa_range"])
    return ModelParams(**data)


def write_grid_header(stream: BinaryIO, grid: GridSpec) -> None:
    stream.write(MAGIC)
    stream.write(struct.pack("<II", VERSION, grid.dim))
    stream.write(struct.pack("<I", 0 if grid.bc_mode == BCMode.PHYSICAL else 1))
    stream.write(struct.pack(f"<{grid.dim}I", *grid.cells))
    stream.write(struct.pack(f"<{grid.dim}d", *grid.extents))


def read_grid_header(stream: BinaryIO) -> GridSpec:
    if stream.read(4) != MAGIC:
        raise CheckpointError("bad magic, not a PFSI file")
    version, dim = struct.unpack("<II", stream.read(8))
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version}")
    (mode,) = struct.unpack("<I", stream.read(4))
    cells = struct.unpack(f"<{dim}I", stream.read(4 * dim))
    extents = struct.unpack(f"<{dim}d", stream.read(8 * dim))
    return GridSpec(extents, cells, BCMode.PHYSICAL if mode == 0 else BCMode.PERIODIC)


def _read_array(stream: BinaryIO, shape: Tuple[int, ...]) -> np.ndarray:
    count = int(np.prod(shape))
    raw = stream.read(8 * count)
    if len(raw) != 8 * count:
        raise CheckpointError("truncated checkpoint")
    return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)


def save_checkpoint(state: SimState, params: ModelParams, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "wb") as stream:
            write_grid_header(stream, state.grid)
            blob = encode_params(params)
            stream.write(struct.pack("<I", len(blob)))
            stream.write(blob)
            stream.write(struct.pack("<dQd", state.t, state.n, state.dt_prev))
            for array in _arrays(state):
                stream.write(np.ascontiguousarray(array, dtype="<f8").tobytes())
    except OSError as e:
        log_output_event("checkpoint", str(path), "failed", error=e)
        raise
    log_output_event("checkpoint", str(path), "completed", step=state.n)
    return path


def load_checkpoint(path) -> Tuple[SimState, ModelParams]:
    path = Path(path)
    with open(path, "rb") as stream:
        grid = read_grid_header(stream)
        (length,) = struct.unpack("<I", stream.read(4))
        params = decode_params(stream.read(length))
        t, n, dt_prev = struct.unpack("<dQd", stream.read(24))
        d = grid.dim
        face_shapes: List[Tuple[int, ...]] = [grid.face_shape(a) for a in range(d)]
        tensor_shape = (d, d) + grid.shape

        u = MacVelocity(grid, tuple(_read_array(stream, s) for s in face_shapes))
        p = ScalarField(grid, _read_array(stream, grid.shape))
        phi = ScalarField(grid, _read_array(stream, grid.shape))
        mu = ScalarField(grid, _read_array(stream, grid.shape))
        F = TensorField(grid, _read_array(stream, tensor_shape))
        u_prev = MacVelocity(grid, tuple(_read_array(stream, s) for s in face_shapes))
        phi_prev = ScalarField(grid, _read_array(stream, grid.shape))
        F_prev = TensorField(grid, _read_array(stream, tensor_shape))
        if stream.read(1):
            raise CheckpointError("trailing bytes after checkpoint payload")

    logger.info(f"📂 [Output] checkpoint loaded from {path} (step {n}, t={t:.6e})")
    state = SimState(t=t, n=n, u=u, p=p, phi=phi, mu=mu, F=F, u_prev=u_prev,
                     phi_prev=phi_prev, F_prev=F_prev, dt_prev=dt_prev)
    return state, params
