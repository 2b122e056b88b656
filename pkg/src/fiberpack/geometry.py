"""Periodic window arithmetic and the seeded RNG contract.

All positions live in a cuboid window W = [0, w1) x [0, w2) x [0, w3) with
periodic boundary conditions.  Distances and directions between stored
(wrapped) points are always computed through the minimum-image delta, whose
component rule is

    delta_i = x2_i - x_i - w_i   if x2_i - x_i >=  w_i / 2
            = x2_i - x_i + w_i   if x2_i - x_i <= -w_i / 2
            = x2_i - x_i         otherwise

so each component ends up in [-w_i/2, w_i/2).  Ties at +w_i/2 take the
subtract branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Vec3 = np.ndarray  # shape (3,), float64


@dataclass(frozen=True)
class Window:
    """Periodic cuboid domain, edge lengths in voxel units."""

    w1: float
    w2: float
    w3: float

    def __post_init__(self):
        if not (self.w1 > 0 and self.w2 > 0 and self.w3 > 0):
            raise ValueError(f"window edges must be positive, got {(self.w1, self.w2, self.w3)}")

    @classmethod
    def cube(cls, edge: float) -> "Window":
        return cls(float(edge), float(edge), float(edge))

    @property
    def arr(self) -> Vec3:
        return np.array([self.w1, self.w2, self.w3], dtype=np.float64)

    @property
    def volume(self) -> float:
        return self.w1 * self.w2 * self.w3


def periodic_delta(x: Vec3, x2: Vec3, w: Window | Vec3) -> Vec3:
    """Minimum-image vector from x to x2; components in [-w_i/2, w_i/2)."""
    warr = w.arr if isinstance(w, Window) else np.asarray(w, dtype=np.float64)
    d = np.asarray(x2, dtype=np.float64) - np.asarray(x, dtype=np.float64)
    d = np.where(d >= 0.5 * warr, d - warr, d)
    d = np.where(d < -0.5 * warr, d + warr, d)
    # the <= -w/2 branch and the wrap above disagree only at the exact tie,
    # where both yield +w/2; map that back to -w/2 (half-open convention)
    d = np.where(d == 0.5 * warr, d - warr, d)
    return d


def periodic_distance(x: Vec3, x2: Vec3, w: Window | Vec3) -> float:
    """Periodic (minimum-image) Euclidean distance."""
    return float(np.linalg.norm(periodic_delta(x, x2, w)))


def periodic_direction(x: Vec3, x2: Vec3, w: Window | Vec3) -> Vec3:
    """Unit vector from x toward x2 along the minimum image.

    Raises ValueError for coincident points (no direction defined).
    """
    d = periodic_delta(x, x2, w)
    n = float(np.linalg.norm(d))
    if n == 0.0:
        raise ValueError("periodic_direction undefined for coincident points")
    return d / n


def wrap(x: Vec3, w: Window | Vec3) -> Vec3:
    """Translate x by lattice vectors so each component lies in [0, w_i)."""
    warr = w.arr if isinstance(w, Window) else np.asarray(w, dtype=np.float64)
    out = np.mod(np.asarray(x, dtype=np.float64), warr)
    # np.mod can return w_i exactly for tiny negative inputs
    return np.where(out == warr, 0.0, out)


def wrap_many(x: np.ndarray, warr: np.ndarray) -> np.ndarray:
    """Row-wise wrap for an (n, 3) position array (in place safe copy)."""
    out = np.mod(x, warr)
    out[out == warr] = 0.0
    return out


@dataclass
class RngState:
    """Splittable deterministic random stream.

    Identical (seed, path) and an identical call sequence reproduce the
    stream bit for bit.  Child streams derived through ``child`` are
    independent of the parent's consumption state, so parallel work keyed
    by index stays deterministic regardless of scheduling.
    """

    seed: int
    path: tuple[int, ...] = ()
    _gen: np.random.Generator | None = field(default=None, repr=False, compare=False)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def child(self, *path: int) -> "RngState":
        return RngState(self.seed, self.path + tuple(int(p) for p in path))
