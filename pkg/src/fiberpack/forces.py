"""Force contributions and their weighted composition.

Conventions (pair forces act on the first argument b):
  repulsion  pushes b away from c by half the softcore overlap,
  spring     restores chain spacing r/2 between neighbors,
  angle      moves an interior ball toward the in-plane point restoring its
             recorded bending angle,
  contact    pulls shortlisted inter-fiber pairs together by half the gap.

The per-ball total is   sum_c F_r + rho * (F_a + sum F_s)            (plain)
or                      sum_c F_r + rho_R * (...) + rho_C * sum F_c  (contact)
with all pair sums restricted by the chain-exclusion relation: balls of the
same fiber within chain distance <= exclusion_span never repel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .generation import FiberSystem
from .geometry import Window, periodic_delta, periodic_distance
from .grid import Grid, build_grid


@dataclass(frozen=True)
class ForceParams:
    tau: float = 0.0
    alpha_s: float = 0.05
    alpha_e: float = 0.1
    rho: float = 0.5
    rho_R: float = 0.5
    rho_C: float = 0.5
    d_c: float = 0.0
    exclusion_span: int = 5

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must be in [0, 1]")
        if self.alpha_s < 0 or self.alpha_e < self.alpha_s:
            raise ValueError("need 0 <= alpha_s <= alpha_e")
        for w in (self.rho, self.rho_R, self.rho_C):
            if not 0.0 <= w <= 1.0:
                raise ValueError("weights must be in [0, 1]")
        if self.d_c < 0:
            raise ValueError("d_c must be >= 0")


def smoothing(alpha: float, alpha_s: float, alpha_e: float) -> float:
    """Raised-cosine ramp from 0 (below alpha_s) to 1 (above alpha_e).

    The degenerate case alpha_s == alpha_e is the indicator of
    alpha > alpha_s, covering the hard-switch variant.
    """
    if alpha_e > alpha_s:
        if alpha < alpha_s:
            return 0.0
        if alpha > alpha_e:
            return 1.0
        return 0.5 - 0.5 * np.cos((abs(alpha) - alpha_s) / (alpha_e - alpha_s) * np.pi)
    return 1.0 if alpha > alpha_s else 0.0


def overlap_I(b_x, c_x, r: float, tau: float, w: Window) -> float:
    """Softcore overlap depth max(0, 2 (1 - tau) r - d_P)."""
    return max(0.0, 2.0 * (1.0 - tau) * r - periodic_distance(b_x, c_x, w))


def effective_distance(b_x, c_x, r: float, w: Window) -> float:
    """Surface gap max(0, d_P - 2r); zero for touching or intersecting balls."""
    return max(0.0, periodic_distance(b_x, c_x, w) - 2.0 * r)


def repulsion(b_x, c_x, r: float, p: ForceParams, w: Window,
              same_fiber_gap: int | None = None) -> np.ndarray:
    """Repulsion on the ball at b_x from the ball at c_x.

    same_fiber_gap is the chain-index distance when both balls belong to
    one fiber (None for distinct fibers); gaps within the exclusion span
    produce no force.
    """
    if same_fiber_gap is not None and same_fiber_gap <= p.exclusion_span:
        return np.zeros(3)
    i = overlap_I(b_x, c_x, r, p.tau, w)
    if i == 0.0:
        return np.zeros(3)
    d = periodic_delta(c_x, b_x, w)  # points from c toward b
    n = np.linalg.norm(d)
    if n == 0.0:
        return 0.5 * i * np.array([1.0, 0.0, 0.0])
    return 0.5 * i * d / n


def spring(b_x, c_x, r: float, p: ForceParams, w: Window) -> np.ndarray:
    """Spring force on b restoring chain spacing r/2 to neighbor c."""
    dist = periodic_distance(b_x, c_x, w)
    alpha_d = 0.5 * r - dist
    f = smoothing(2.0 * abs(alpha_d) / r, p.alpha_s, p.alpha_e)
    if f == 0.0 or dist == 0.0:
        return np.zeros(3)
    d = periodic_delta(c_x, b_x, w)
    return f * alpha_d * d / dist


def contact(b_x, c_x, r: float, p: ForceParams, w: Window) -> np.ndarray:
    """Contact force on b attracting it toward c until the surfaces touch."""
    de = effective_distance(b_x, c_x, r, w)
    if de == 0.0:
        return np.zeros(3)
    f = smoothing(de, 0.0, p.d_c) if p.d_c > 0 else 1.0
    d = periodic_delta(b_x, c_x, w)  # points from b toward c
    n = np.linalg.norm(d)
    return 0.5 * f * de * d / n


def angle(prev_x, b_x, next_x, ref_angle: float, p: ForceParams,
          w: Window) -> np.ndarray:
    """Angle force on the interior ball b of the triple (prev, b, next).

    Target point construction: within the triple's plane, the locus of
    points seeing the prev-next chord under the reference angle is a
    circular arc; b is displaced along its internal bisector toward the
    nearest point of that arc, scaled by 1/2 and by the smoothing of the
    normalized angular deviation.  Collinear triples and endpoints give
    no force.
    """
    np_backend = kernels.get_backend("numpy")
    xs = np.vstack([prev_x, b_x, next_x]).astype(np.float64)
    fiber_id = np.zeros(3, dtype=np.int32)
    chain_idx = np.arange(3, dtype=np.int32)
    ref = np.array([np.pi, ref_angle, np.pi])
    F = np_backend._angle_forces(xs, fiber_id, chain_idx, ref, 3, w.arr,
                                 p.alpha_s, p.alpha_e)
    return F[1]


def evaluate_forces(sys: FiberSystem, p: ForceParams, g: Grid | None = None,
                    shortlist=None, use_contact: bool | None = None):
    """Total force per ball plus overlap statistics.

    Returns (F, overlap_count, max_overlap_soft, max_overlap_hard).  With
    an empty shortlist the recovery weight is rho (plain force), otherwise
    rho_R with the contact term weighted by rho_C.
    """
    if g is None:
        g = build_grid(sys.x, sys.window, sys.r)
    if use_contact is None:
        use_contact = shortlist is not None and len(shortlist) > 0
    rho_rec = p.rho_R if use_contact else p.rho
    rho_con = p.rho_C if use_contact else 0.0
    if shortlist is not None and len(shortlist) > 0:
        sl_b = np.concatenate([shortlist.b, shortlist.c])
        sl_c = np.concatenate([shortlist.c, shortlist.b])
    else:
        sl_b = np.empty(0, dtype=np.int64)
        sl_c = np.empty(0, dtype=np.int64)
    return kernels.total_forces(
        sys.x, sys.fiber_id, sys.chain_idx, sys.ref_angle, sys.l,
        sys.window.arr, g.cell_counts, g.order, g.cell_start, g.cells,
        sys.r, p.tau, p.alpha_s, p.alpha_e, rho_rec, rho_con, p.d_c,
        p.exclusion_span, sl_b, sl_c)


def total_force(ball_id: int, sys: FiberSystem, p: ForceParams,
                g: Grid | None = None, shortlist=None) -> np.ndarray:
    """Total force on one ball (row of the full evaluation)."""
    F, _, _, _ = evaluate_forces(sys, p, g, shortlist)
    return F[ball_id]
