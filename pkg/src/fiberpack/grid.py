"""Subwindow decomposition for neighbor queries under periodic boundaries.

The window is divided into cells of edge at least max(2.5 r, (2 + eps) r),
so any pair within the supported cutoff sits in adjacent cells and a
one-ring scan is exhaustive.  Cell lists follow the convention that a
cell's list holds the balls centered in it and in its 26 periodic
neighbors; the stored structure is a CSR over own-cell membership from
which those lists are assembled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import Window


@dataclass
class Grid:
    window: Window
    cell_counts: np.ndarray      # (3,) int64
    cell_edges: np.ndarray       # (3,) float64, each >= the minimum edge
    order: np.ndarray            # ball ids sorted by cell id
    cell_start: np.ndarray       # CSR offsets, len ncells + 1
    cells: np.ndarray            # cell id per ball
    min_edge: float              # the enforced minimum cell edge

    @property
    def n_cells(self) -> int:
        return int(self.cell_counts.prod())

    def cell_list(self, cell: int) -> np.ndarray:
        """Ball ids in the cell and its 26 periodic neighbors (deduplicated)."""
        nc = self.cell_counts
        kx, rem = divmod(int(cell), int(nc[1] * nc[2]))
        ky, kz = divmod(rem, int(nc[2]))
        seen = set()
        ids = []
        offs = [kernels.get_backend("numpy").axis_offsets(int(n)) for n in nc]
        for dx in offs[0]:
            for dy in offs[1]:
                for dz in offs[2]:
                    c = ((kx + dx) % nc[0] * nc[1] + (ky + dy) % nc[1]) * nc[2] \
                        + (kz + dz) % nc[2]
                    c = int(c)
                    if c in seen:
                        continue
                    seen.add(c)
                    ids.append(self.order[self.cell_start[c]:self.cell_start[c + 1]])
        return np.sort(np.concatenate(ids)) if ids else np.empty(0, dtype=np.int64)


def min_cell_edge(r: float, eps_max: float) -> float:
    """Smallest admissible subwindow edge for interaction reach eps_max."""
    return max(2.5 * r, (2.0 + eps_max) * r)


def build_grid(positions: np.ndarray, window: Window, r: float,
               eps_max: float = 0.0, min_cutoff: float | None = None) -> Grid:
    """Bin wrapped positions into cells sized for the requested reach.

    ``min_cutoff`` additionally forces cell edges to cover an absolute
    query cutoff (candidate queries use 2r + d_c + eps, which can exceed
    the relative formula for small radii).
    """
    if eps_max < 0:
        raise ValueError("eps_max must be >= 0")
    edge = min_cell_edge(r, eps_max)
    if min_cutoff is not None:
        edge = max(edge, float(min_cutoff))
    warr = window.arr
    nc = np.maximum(1, np.floor(warr / edge).astype(np.int64))
    order, cell_start, cells = kernels.build_cell_csr(positions, warr, nc)
    return Grid(window=window, cell_counts=nc, cell_edges=warr / nc,
                order=order, cell_start=cell_start, cells=cells,
                min_edge=edge)


def candidate_pairs(positions: np.ndarray, g: Grid, cutoff: float):
    """Unordered pairs (i, j, distance) with periodic distance <= cutoff.

    The one-ring scan is exhaustive only for cutoffs within the cell edge;
    larger cutoffs would silently drop pairs, so they are rejected.
    """
    limited = g.cell_counts >= 3   # with <= 2 cells the ring already covers the axis
    if np.any(limited & (cutoff > g.cell_edges * (1.0 + 1e-12))):
        raise ValueError(
            f"cutoff {cutoff} exceeds minimum cell edge {g.cell_edges.min()}; "
            "rebuild the grid with a larger eps_max/min_cutoff")
    return kernels.pairs_within(positions, g.window.arr, g.cell_counts,
                                g.order, g.cell_start, g.cells, cutoff)
