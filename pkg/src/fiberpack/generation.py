"""Initial fiber systems: random-walk ball chains and overlap-minimizing
placement.

A fiber is a chain of l overlapping balls of radius r spaced r/2 apart.
The walk direction of step i+1 is drawn from the two-pole von Mises-Fisher
law combining the fiber's main direction (weight kappa1) with the previous
step (weight kappa2).  After the walk the chain is rigidly rotated so its
end-to-end chord matches the drawn main direction.  Placement picks, per
fiber, the best of a fixed number of uniform trial positions by total
hardcore overlap against everything already placed; fibers are never
resampled and residual overlap is left for the packing stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .distributions import MvmfParams, SchladitzParams, combine_mvmf, sample_schladitz, sample_vmf
from .geometry import RngState, Vec3, Window, wrap_many


@dataclass(frozen=True)
class Ball:
    """Single packing unit: center, walk direction, radius."""

    x: Vec3
    mu: Vec3
    r: float


@dataclass
class Fiber:
    """Ordered ball chain; positions may be unwrapped during construction."""

    xs: np.ndarray            # (l, 3)
    mus: np.ndarray           # (l, 3); row 0 is the main direction
    r: float
    id: int = -1
    degenerate: bool = False  # end-to-end chord vanished, rotation skipped

    @property
    def l(self) -> int:
        return self.xs.shape[0]

    @property
    def balls(self) -> list[Ball]:
        return [Ball(self.xs[i].copy(), self.mus[i].copy(), self.r)
                for i in range(self.l)]

    def chord(self) -> Vec3:
        return self.xs[-1] - self.xs[0]

    def main_direction(self) -> Vec3:
        c = self.chord()
        n = np.linalg.norm(c)
        if n == 0:
            raise ValueError("degenerate fiber: coincident endpoints")
        return c / n


@dataclass
class FiberSystem:
    """Ball-chain graph over a periodic window, flattened to arrays.

    Ball i of fiber j sits at global index j * l + i, so chain edges are
    exactly the consecutive-index pairs within one fiber.
    """

    window: Window
    r: float
    l: int
    x: np.ndarray           # (n*l, 3) wrapped centers
    mu: np.ndarray          # (n*l, 3) walk directions
    fiber_id: np.ndarray    # (n*l,) int32
    chain_idx: np.ndarray   # (n*l,) int32
    ref_angle: np.ndarray   # (n*l,) float64; interior balls only, else pi
    meta: dict = field(default_factory=dict)

    @property
    def n_fibers(self) -> int:
        return 0 if self.l == 0 else self.x.shape[0] // self.l

    @property
    def n_balls(self) -> int:
        return self.x.shape[0]

    def fiber_slice(self, j: int) -> slice:
        return slice(j * self.l, (j + 1) * self.l)

    def fiber(self, j: int) -> Fiber:
        s = self.fiber_slice(j)
        return Fiber(xs=self.x[s].copy(), mus=self.mu[s].copy(), r=self.r, id=j)

    def copy(self) -> "FiberSystem":
        return FiberSystem(window=self.window, r=self.r, l=self.l,
                           x=self.x.copy(), mu=self.mu.copy(),
                           fiber_id=self.fiber_id.copy(),
                           chain_idx=self.chain_idx.copy(),
                           ref_angle=self.ref_angle.copy(),
                           meta=dict(self.meta))


@dataclass
class GenerationConfig:
    n_fibers: int
    chain_length: int
    radius: float
    beta: float
    kappa1: float
    kappa2: float
    prepack_trials: int = 10

    def __post_init__(self):
        if self.n_fibers < 1 or self.chain_length < 1 or self.prepack_trials < 1:
            raise ValueError("counts must be >= 1")
        if not (self.radius > 0 and self.beta > 0 and self.kappa1 > 0 and self.kappa2 > 0):
            raise ValueError("radius, beta, kappa1, kappa2 must be positive")


def fiber_length(l: int, r: float) -> float:
    """Physical fiber length: centerline (l-1) r/2 plus both end caps."""
    if l == 1:
        return 2.0 * r
    return (l - 1) * r / 2.0 + 2.0 * r


def chain_length_for(length: float, r: float) -> int:
    """Invert the length convention; e.g. length 120 at r=2 gives l=117."""
    l = int(round((length - 2.0 * r) * 2.0 / r)) + 1
    return max(l, 1)


def fiber_union_volume(l: int, r: float) -> float:
    """Exact volume of the union of l balls of radius r spaced r/2 apart.

    Each step adds a ball minus the lens shared by two r-balls at center
    distance r/2.
    """
    vball = 4.0 / 3.0 * np.pi * r ** 3
    if l == 1:
        return vball
    d = r / 2.0
    lens = np.pi * (4.0 * r + d) * (2.0 * r - d) ** 2 / 12.0
    return vball + (l - 1) * (vball - lens)


def fiber_count_for_volume_fraction(vv: float, window: Window, l: int, r: float) -> int:
    """Number of fibers for a target solid volume fraction."""
    n = int(round(vv * window.volume / fiber_union_volume(l, r)))
    return max(n, 1)


def random_walk_fiber(start: Vec3, mu1: Vec3, cfg: GenerationConfig,
                      rng: RngState) -> Fiber:
    """Generate one chain: steps of length r/2 with mvMF-steered directions."""
    l = cfg.chain_length
    r = cfg.radius
    xs = np.empty((l, 3))
    mus = np.empty((l, 3))
    xs[0] = start
    mus[0] = mu1
    prev_dir = np.asarray(mu1, dtype=np.float64)
    for i in range(1, l):
        law = combine_mvmf(MvmfParams(mu1=mu1, kappa1=cfg.kappa1,
                                      mu2=prev_dir, kappa2=cfg.kappa2))
        step = sample_vmf(law, rng)
        xs[i] = xs[i - 1] + 0.5 * r * step
        mus[i] = step
        prev_dir = step
    return Fiber(xs=xs, mus=mus, r=r)


def _rotation_between(a: Vec3, b: Vec3) -> np.ndarray:
    """Rotation matrix taking unit vector a onto unit vector b (Rodrigues)."""
    v = np.cross(a, b)
    c = float(np.dot(a, b))
    s = float(np.linalg.norm(v))
    if s < 1e-15:
        if c > 0:
            return np.eye(3)
        # antiparallel: rotate pi about any axis orthogonal to a
        axis = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-12:
            axis = np.cross(a, [0.0, 1.0, 0.0])
        axis /= np.linalg.norm(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    vx = np.array([[0.0, -v[2], v[1]],
                   [v[2], 0.0, -v[0]],
                   [-v[1], v[0], 0.0]])
    return np.eye(3) + vx + vx @ vx * ((1.0 - c) / (s * s))


def align_main_direction(f: Fiber, mu1: Vec3) -> Fiber:
    """Rigidly rotate the chain about its centroid so the end-to-end chord
    points along mu1.  A vanished chord flags the fiber and skips rotation."""
    chord = f.chord()
    nrm = float(np.linalg.norm(chord))
    if nrm < 1e-12:
        return Fiber(xs=f.xs.copy(), mus=f.mus.copy(), r=f.r, id=f.id,
                     degenerate=True)
    rot = _rotation_between(chord / nrm, np.asarray(mu1, dtype=np.float64))
    centroid = f.xs.mean(axis=0)
    xs = (f.xs - centroid) @ rot.T + centroid
    mus = np.empty_like(f.mus)
    mus[0] = mu1
    steps = xs[1:] - xs[:-1]
    mus[1:] = steps / np.linalg.norm(steps, axis=1)[:, None]
    return Fiber(xs=xs, mus=mus, r=f.r, id=f.id)


def _reference_angles(xs: np.ndarray) -> np.ndarray:
    """Interior angles at each ball of a chain; endpoints get pi."""
    l = xs.shape[0]
    ref = np.full(l, np.pi)
    if l >= 3:
        a = xs[:-2] - xs[1:-1]
        c = xs[2:] - xs[1:-1]
        dot = np.einsum("ij,ij->i", a, c)
        cross = np.linalg.norm(np.cross(a, c), axis=1)
        ref[1:-1] = np.arctan2(cross, dot)
    return ref


def prepack(cfg: GenerationConfig, window: Window, rng: RngState) -> FiberSystem:
    """Generate all fibers and place each at its best trial position.

    Per fiber, prepack_trials uniform start positions are scored by total
    hardcore overlap against already-placed balls; the first minimum wins.
    Overlap is reduced, not eliminated.
    """
    warr = window.arr
    n, l, r = cfg.n_fibers, cfg.chain_length, cfg.radius
    sp = SchladitzParams(cfg.beta)

    fibers = []
    for j in range(n):
        frng = rng.child(0, j)
        mu1 = sample_schladitz(sp, frng)
        f = random_walk_fiber(np.zeros(3), mu1, cfg, frng)
        f = align_main_direction(f, mu1)
        f.id = j
        fibers.append(f)

    index = kernels.PlacementIndex(warr, r, capacity=n * l)
    x = np.empty((n * l, 3))
    mu = np.empty((n * l, 3))
    for j, f in enumerate(fibers):
        prng = rng.child(1, j)
        starts = prng.generator.uniform(0.0, 1.0, size=(cfg.prepack_trials, 3)) * warr
        rel = f.xs - f.xs[0]
        best_overlap = np.inf
        best = None
        for t in range(cfg.prepack_trials):
            trial = wrap_many(rel + starts[t], warr)
            ov = index.overlap(trial)
            if ov < best_overlap:
                best_overlap = ov
                best = trial
        s = slice(j * l, (j + 1) * l)
        x[s] = best
        mu[s] = f.mus
        index.add_balls(best)

    ref = np.concatenate([_reference_angles(f.xs) for f in fibers]) if n else np.empty(0)
    sys = FiberSystem(
        window=window, r=r, l=l, x=x, mu=mu,
        fiber_id=np.repeat(np.arange(n, dtype=np.int32), l),
        chain_idx=np.tile(np.arange(l, dtype=np.int32), n),
        ref_angle=ref,
        meta={"beta": cfg.beta, "kappa1": cfg.kappa1, "kappa2": cfg.kappa2,
              "prepack_trials": cfg.prepack_trials,
              "degenerate_fibers": [f.id for f in fibers if f.degenerate]},
    )
    return sys


def generate(cfg: GenerationConfig, window: Window, rng: RngState) -> FiberSystem:
    """Full initial system: random walks, alignment, overlap-reducing placement."""
    return prepack(cfg, window, rng)
