"""Binary container for sampled fields.

Layout (all multi-byte values little-endian):

    bytes 0..3    magic ``MKF1``
    bytes 4..11   d        int64
    bytes 12..19  n        int64
    bytes 20..27  nt       int64
    bytes 28..35  t_final  float64
    bytes 36..43  component count  int64
    bytes 44..    samples, float64, one component after another, each
                  component row-major with index order (t, x_0, ..., x_{d-1})

A scalar field stores one component; a velocity field stores d; a full
iteration state stores 1 + d (density first, then the velocity components).
The format caps d at 16: a corrupted dimension field must be diagnosed at
its own byte offset, not as a nonsensical payload-size mismatch, so the
reader needs an upper plausibility bound and the writer honors the same one.
Writes go through a temporary file and an atomic rename.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import ContainerFormatError
from .grid import GridSpec, ScalarField, VectorField

__all__ = ["MAGIC", "read_container", "write_container", "read_state", "write_state"]

MAGIC = b"MKF1"
_HEADER = struct.Struct("<4sqqqdq")
_MAX_D = 16


def write_container(path: str, spec: GridSpec, arrays: list[np.ndarray]) -> None:
    """Write sample arrays (each of shape spec.shape) atomically to path."""
    if not arrays:
        raise ValueError("container needs at least one component")
    if spec.d > _MAX_D:
        raise ValueError(f"container format stores at most d = {_MAX_D}, got {spec.d}")
    header = _HEADER.pack(
        MAGIC, spec.d, spec.n, spec.nt, float(spec.t_final), len(arrays)
    )
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            for arr in arrays:
                arr = np.ascontiguousarray(arr, dtype=np.float64)
                if arr.shape != spec.shape:
                    raise ValueError(
                        f"component shape {arr.shape} does not match grid {spec.shape}"
                    )
                fh.write(arr.astype("<f8", copy=False).tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_container(path: str) -> tuple[GridSpec, list[np.ndarray]]:
    """Read a container back into a grid spec and its component arrays."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise ContainerFormatError(
            f"truncated header: {len(blob)} bytes, need {_HEADER.size}", len(blob)
        )
    magic, d, n, nt, t_final, ncomp = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ContainerFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if not 2 <= d <= _MAX_D or n < 2 or nt < 1:
        raise ContainerFormatError(f"implausible header d={d} n={n} nt={nt}", 4)
    if not t_final > 0:
        raise ContainerFormatError(f"non-positive t_final {t_final}", 28)
    if ncomp < 1:
        raise ContainerFormatError(f"component count {ncomp} < 1", 36)
    spec = GridSpec(d=d, n=n, nt=nt, t_final=t_final)
    per_comp = nt * n**d
    expected = _HEADER.size + 8 * per_comp * ncomp
    if len(blob) != expected:
        raise ContainerFormatError(
            f"payload size {len(blob)} != expected {expected}", min(len(blob), expected)
        )
    arrays = []
    for i in range(ncomp):
        start = _HEADER.size + 8 * per_comp * i
        flat = np.frombuffer(blob, dtype="<f8", count=per_comp, offset=start)
        arrays.append(flat.reshape(spec.shape).copy())
    return spec, arrays


def write_state(path: str, rho: ScalarField, u: VectorField) -> None:
    """Persist a density + velocity pair as one container (1 + d components)."""
    if rho.spec != u.spec:
        raise ValueError("density and velocity must share the grid spec")
    arrays = [rho.values] + [c.values for c in u.components]
    write_container(path, rho.spec, arrays)


def read_state(path: str) -> tuple[ScalarField, VectorField]:
    """Load a density + velocity pair written by write_state."""
    spec, arrays = read_container(path)
    if len(arrays) != 1 + spec.d:
        raise ContainerFormatError(
            f"state container needs {1 + spec.d} components, found {len(arrays)}", 36
        )
    rho = ScalarField(spec, arrays[0])
    u = VectorField.from_arrays(spec, arrays[1:])
    return rho, u
