"""Binary occupancy rasters of the union of balls.

Format: text header (dimensions, spacing, byte order, voxel layout)
terminated by ``end_header``, followed by the raw uint8 volume in C order
(x slowest, z fastest).  A voxel is occupied when its center lies within
one ball radius, with periodic clipping at the raster boundary.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import kernels
from .generation import FiberSystem

DEFAULT_BUDGET = 2 ** 31  # bytes


def raster_dims(sys: FiberSystem, spacing: float) -> tuple[int, int, int]:
    w = sys.window.arr
    return tuple(int(max(1, round(e / spacing))) for e in w)


def export_voxels(sys: FiberSystem, spacing: float, path: str | Path,
                  max_bytes: int = DEFAULT_BUDGET) -> tuple[int, int, int]:
    """Rasterize and write; returns the raster dimensions."""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    dims = raster_dims(sys, spacing)
    nbytes = dims[0] * dims[1] * dims[2]
    if nbytes > max_bytes:
        raise MemoryError(f"raster of {nbytes} bytes exceeds budget {max_bytes}")
    vol = kernels.rasterize_balls(sys.x, sys.r, spacing, dims)
    header = "\n".join([
        "FIBERPACK VOXELS v1",
        f"dims = {dims[0]} {dims[1]} {dims[2]}",
        f"spacing = {spacing!r}",
        "dtype = uint8",
        "byteorder = little",
        "layout = C x-major",
        "end_header",
    ]) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode())
        fh.write(vol.tobytes(order="C"))
    return dims


def load_voxels(path: str | Path) -> tuple[np.ndarray, float]:
    raw = Path(path).read_bytes()
    cut = raw.index(b"end_header\n") + len(b"end_header\n")
    fields = {}
    for line in raw[:cut].decode().splitlines()[1:-1]:
        k, _, v = line.partition(" = ")
        fields[k] = v
    dims = tuple(int(t) for t in fields["dims"].split())
    spacing = float(fields["spacing"])
    vol = np.frombuffer(raw[cut:], dtype=np.uint8).reshape(dims)
    return vol, spacing
