"""Iterative force-biased packing.

One iteration: evaluate all forces on the current position snapshot, then
move every ball by its total force vector, re-wrap, rebuild the grid.
The plain scheme iterates with repulsion + recovery until the sum of force
magnitudes stops decreasing by a relative amount (or an iteration cap).
The contact scheme first collects inter-fiber candidate pairs within the
interaction distance, prunes them to a shortlist (one pair per ball per
fiber pair, locally minimal distance), iterates with the added contact
force, drops entries whose balls still carry conflicting forces above a
threshold, and iterates once more; an increasing interaction-distance
schedule repeats the whole block.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .forces import ForceParams, evaluate_forces
from .generation import FiberSystem
from .geometry import wrap_many
from .grid import Grid, build_grid, candidate_pairs


@dataclass
class PackingParams:
    force_params: ForceParams = field(default_factory=ForceParams)
    rel_decrease_limit: float = 1e-5
    max_iterations: int = 1000
    conflict_threshold: float = 0.1
    epsilon: float = 0.5
    epsilon_schedule: list[float] | None = None
    refresh_candidates_every: int = 0   # 0 = candidates fixed per phase
    # Per-step displacement cap in units of r (0 disables).  Uncapped
    # synchronized updates let stacked repulsion kicks stretch chains, whose
    # full-deficit spring forces then overshoot and the system whips apart;
    # clamping |move| <= r keeps all single-pair resolutions intact (their
    # half-gap forces never exceed r) while bounding the feedback.
    max_step_factor: float = 1.0

    def __post_init__(self):
        if self.rel_decrease_limit <= 0:
            raise ValueError("rel_decrease_limit must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.conflict_threshold <= 0:
            raise ValueError("conflict_threshold must be > 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.epsilon_schedule is not None:
            sched = list(self.epsilon_schedule)
            if any(e < 0 for e in sched) or sched != sorted(sched):
                raise ValueError("epsilon_schedule must be nondecreasing and >= 0")


@dataclass
class IterationStats:
    iteration: int
    force_vec_sum: float      # norm of the vector sum of all forces
    force_mag_sum: float      # sum of per-ball force norms (stop quantity)
    max_force: float
    overlap_count: int
    max_overlap: float        # softcore overlap depth
    max_overlap_hard: float   # hardcore overlap depth
    wall_time: float
    phase: str = ""
    epsilon: float = 0.0


@dataclass
class Shortlist:
    """Contact-candidate pairs, one per ball per fiber pair."""

    b: np.ndarray              # global ball ids
    c: np.ndarray
    dist: np.ndarray           # pair distance at build time

    def __len__(self) -> int:
        return int(self.b.size)

    @classmethod
    def empty(cls) -> "Shortlist":
        z = np.empty(0, dtype=np.int64)
        return cls(b=z, c=z.copy(), dist=np.empty(0))


class NonFiniteForceError(RuntimeError):
    def __init__(self, ball_id: int):
        self.ball_id = int(ball_id)
        super().__init__(f"non-finite force on ball {ball_id}")


def step(sys: FiberSystem, p: PackingParams, shortlist: Shortlist | None = None,
         g: Grid | None = None) -> tuple[FiberSystem, IterationStats, Grid]:
    """One synchronized packing iteration; mutates sys in place.

    Forces are computed on the pre-step snapshot, then every ball moves by
    its total force; positions re-wrap and the grid is rebuilt.
    """
    t0 = time.perf_counter()
    if g is None:
        g = build_grid(sys.x, sys.window, sys.r)
    F, n_ov, max_soft, max_hard = evaluate_forces(sys, p.force_params, g, shortlist)
    if not np.isfinite(F).all():
        bad = int(np.nonzero(~np.isfinite(F).all(axis=1))[0][0])
        raise NonFiniteForceError(bad)
    move = F
    if p.max_step_factor > 0:
        cap = p.max_step_factor * sys.r
        norms0 = np.linalg.norm(F, axis=1)
        over = norms0 > cap
        if over.any():
            move = F.copy()
            move[over] *= (cap / norms0[over])[:, None]
    sys.x += move
    sys.x = wrap_many(sys.x, sys.window.arr)
    g = build_grid(sys.x, sys.window, sys.r)
    norms = np.linalg.norm(F, axis=1)
    stats = IterationStats(
        iteration=0,
        force_vec_sum=float(np.linalg.norm(F.sum(axis=0))),
        force_mag_sum=float(norms.sum()),
        max_force=float(norms.max()) if norms.size else 0.0,
        overlap_count=n_ov,
        max_overlap=max_soft,
        max_overlap_hard=max_hard,
        wall_time=time.perf_counter() - t0,
    )
    return sys, stats, g


def stop_criterion(history: list[IterationStats], p: PackingParams) -> bool:
    """True when the magnitude sum stalls (a genuine decrease smaller than
    the relative limit), vanishes, or the iteration cap is reached.

    Transient increases do not stop the run: the sum regularly spikes while
    a local rearrangement resolves, and only an actual near-zero decrease
    signals convergence.
    """
    if not history:
        return False
    if len(history) >= p.max_iterations:
        return True
    cur = history[-1].force_mag_sum
    if cur == 0.0:
        return True
    if len(history) < 2:
        return False
    prev = history[-2].force_mag_sum
    if prev == 0.0:
        return True
    rel = (prev - cur) / prev
    return 0.0 <= rel < p.rel_decrease_limit


def _run_phase(sys: FiberSystem, p: PackingParams, sl: Shortlist | None,
               phase: str, epsilon: float, grid_holder: list,
               refresh=None) -> list[IterationStats]:
    history: list[IterationStats] = []
    g = grid_holder[0]
    while True:
        if refresh is not None and p.refresh_candidates_every > 0 \
                and history and len(history) % p.refresh_candidates_every == 0:
            sl = refresh(sys)
        sys, stats, g = step(sys, p, sl, g)
        stats.iteration = len(history) + 1
        stats.phase = phase
        stats.epsilon = epsilon
        history.append(stats)
        if stop_criterion(history, p):
            break
    grid_holder[0] = g
    return history


def pack_aj(sys: FiberSystem, p: PackingParams,
            trace: str | None = None) -> tuple[FiberSystem, list[IterationStats]]:
    """Plain force-biased packing: repulsion + recovery, no contact force."""
    holder = [build_grid(sys.x, sys.window, sys.r)]
    history = _run_phase(sys, p, None, "aj", 0.0, holder)
    if trace:
        write_trace(trace, history)
    return sys, history


def find_candidates(sys: FiberSystem, eps: float, g: Grid,
                    d_c: float = 0.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inter-fiber ball pairs with periodic distance <= 2r + d_c + eps.

    Pairs already in contact or intersecting are deliberately included.
    """
    cutoff = 2.0 * sys.r + d_c + eps
    i, j, d = candidate_pairs(sys.x, g, cutoff)
    inter = sys.fiber_id[i] != sys.fiber_id[j]
    return i[inter], j[inter], d[inter]


def shortlist(E: tuple[np.ndarray, np.ndarray, np.ndarray],
              sys: FiberSystem) -> Shortlist:
    """Reduce candidate edges to locally minimal ones.

    An edge survives iff it is the minimum-distance edge among all
    candidate edges of the same fiber pair sharing either of its balls
    (ties broken toward the lower (fiber id, ball id) pair), which leaves
    every ball in at most one pair per fiber pair.
    """
    i, j, d = E
    if i.size == 0:
        return Shortlist.empty()
    fi = sys.fiber_id[i].astype(np.int64)
    fj = sys.fiber_id[j].astype(np.int64)
    gmin = np.minimum(i, j)
    gmax = np.maximum(i, j)
    order = np.lexsort((gmax, gmin, d))
    rank = np.empty(i.size, dtype=np.int64)
    rank[order] = np.arange(i.size)

    fmin = np.minimum(fi, fj)
    fmax = np.maximum(fi, fj)
    n_f = max(int(sys.n_fibers), 1)
    pair_key = fmin * n_f + fmax
    nb = sys.n_balls

    # minimum edge rank per (fiber pair, ball), pooled over both endpoints
    m = i.size
    keys = np.concatenate([pair_key * np.int64(nb) + i,
                           pair_key * np.int64(nb) + j])
    uniq, inv = np.unique(keys, return_inverse=True)
    best = np.full(uniq.size, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(best, inv, np.concatenate([rank, rank]))
    keep = (rank == best[inv[:m]]) & (rank == best[inv[m:]])
    return Shortlist(b=i[keep].astype(np.int64), c=j[keep].astype(np.int64),
                     dist=d[keep])


def prune_conflicting(sl: Shortlist, sys: FiberSystem, p: PackingParams,
                      g: Grid | None = None) -> tuple[Shortlist, int]:
    """Drop entries whose balls carry a total force above the threshold.

    Forces are evaluated at current positions with the contact composition.
    Returns the pruned shortlist and the number of removed entries.
    """
    if len(sl) == 0:
        return sl, 0
    F, _, _, _ = evaluate_forces(sys, p.force_params, g, sl)
    norms = np.linalg.norm(F, axis=1)
    bad = (norms[sl.b] > p.conflict_threshold) | (norms[sl.c] > p.conflict_threshold)
    keep = ~bad
    return Shortlist(b=sl.b[keep], c=sl.c[keep], dist=sl.dist[keep]), int(bad.sum())


def pack_contact(sys: FiberSystem, p: PackingParams, trace: str | None = None
                 ) -> tuple[FiberSystem, list[IterationStats], list[Shortlist]]:
    """Contact packing: candidates -> shortlist -> iterate -> prune -> iterate,
    repeated over the interaction-distance schedule."""
    schedule = p.epsilon_schedule if p.epsilon_schedule else [p.epsilon]
    d_c = p.force_params.d_c
    history: list[IterationStats] = []
    shortlists: list[Shortlist] = []
    for eps in schedule:
        wide = build_grid(sys.x, sys.window, sys.r, eps_max=eps + d_c,
                          min_cutoff=2.0 * sys.r + d_c + eps)
        sl = shortlist(find_candidates(sys, eps, wide, d_c), sys)
        shortlists.append(sl)

        def refresh(s, _eps=eps, _dc=d_c):
            wg = build_grid(s.x, s.window, s.r, eps_max=_eps + _dc,
                            min_cutoff=2.0 * s.r + _dc + _eps)
            return shortlist(find_candidates(s, _eps, wg, _dc), s)

        holder = [build_grid(sys.x, sys.window, sys.r)]
        history += _run_phase(sys, p, sl, "contact", eps, holder,
                              refresh=refresh)
        pruned, n_removed = prune_conflicting(sl, sys, p, holder[0])
        if n_removed > 0:
            shortlists.append(pruned)
            history += _run_phase(sys, p, pruned, "contact-pruned", eps, holder)
    if trace:
        write_trace(trace, history)
    return sys, history, shortlists


def write_trace(path: str, history: list[IterationStats]) -> None:
    """Per-iteration stats as CSV, one row per iteration."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["phase", "epsilon", "iteration", "force_mag_sum",
                     "force_vec_sum", "max_force", "overlap_count",
                     "max_overlap", "max_overlap_hard", "wall_time"])
        for s in history:
            wr.writerow([s.phase, s.epsilon, s.iteration, repr(s.force_mag_sum),
                         repr(s.force_vec_sum), repr(s.max_force),
                         s.overlap_count, repr(s.max_overlap),
                         repr(s.max_overlap_hard), repr(s.wall_time)])
