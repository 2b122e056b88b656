"""Contact statistics over packed fiber systems.

Closeness between balls of distinct fibers (gap at most d) defines an
edge set; extending it with the incident chain edges merges ball-level
contacts into fiber-level contact regions.  Connected components of the
extended graph with exactly two participating fibers count as contacts,
components with three or more as clots.  The pairwise counting mode
instead counts every fiber pair directly linked inside a component.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats as sstats

from .generation import FiberSystem
from .geometry import periodic_delta
from .grid import Grid, build_grid, candidate_pairs


@dataclass
class ClosenessGraph:
    d: float
    edges: tuple[np.ndarray, np.ndarray, np.ndarray]       # inter-fiber (i, j, dist)
    extended: tuple[np.ndarray, np.ndarray]                # plus incident chain edges


@dataclass
class Component:
    balls: np.ndarray
    fibers: np.ndarray
    fiber_pairs: set[tuple[int, int]]


@dataclass
class ContactStats:
    counting_mode: str
    n_contacts: int
    n_clots: int
    lambda_c: float
    lambda_cF: float
    lambda_cl: float
    lambda_clF: float
    per_fiber_contacts: np.ndarray
    per_fiber_clots: np.ndarray
    component_fiber_multiplicities: dict[int, int] = field(default_factory=dict)


@dataclass
class PoissonFit:
    mean: float
    chi2: float
    p_value: float
    dof: int


class UnionFind:
    """Array union-find with path compression (union by size)."""

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64)

    def find(self, a: int) -> int:
        p = self.parent
        root = a
        while p[root] != root:
            root = p[root]
        while p[a] != root:
            p[a], a = root, p[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def closeness_edges(sys: FiberSystem, d: float, g: Grid | None = None):
    """Inter-fiber ball pairs with periodic distance <= 2r + d."""
    cutoff = 2.0 * sys.r + d
    if g is None:
        g = build_grid(sys.x, sys.window, sys.r, eps_max=d,
                       min_cutoff=cutoff)
    i, j, dist = candidate_pairs(sys.x, g, cutoff)
    inter = sys.fiber_id[i] != sys.fiber_id[j]
    return i[inter], j[inter], dist[inter]


def extend_edges(E, sys: FiberSystem):
    """Add the chain edges incident to any ball touched by a closeness edge."""
    i, j, _ = E
    touched = np.zeros(sys.n_balls, dtype=bool)
    touched[i] = True
    touched[j] = True
    gid = np.nonzero(touched)[0]
    extra_a = []
    extra_b = []
    for b in gid:
        ci = sys.chain_idx[b]
        if ci > 0:
            extra_a.append(b - 1)
            extra_b.append(b)
        if ci < sys.l - 1:
            extra_a.append(b)
            extra_b.append(b + 1)
    ea = np.concatenate([i, np.asarray(extra_a, dtype=np.int64)]) if extra_a else i.copy()
    eb = np.concatenate([j, np.asarray(extra_b, dtype=np.int64)]) if extra_b else j.copy()
    if ea.size:
        key = np.minimum(ea, eb) * np.int64(sys.n_balls) + np.maximum(ea, eb)
        _, first = np.unique(key, return_index=True)
        ea, eb = ea[first], eb[first]
    return ea, eb


def closeness_graph(sys: FiberSystem, d: float, g: Grid | None = None) -> ClosenessGraph:
    E = closeness_edges(sys, d, g)
    return ClosenessGraph(d=d, edges=E, extended=extend_edges(E, sys))


def components(graph: ClosenessGraph, sys: FiberSystem) -> list[Component]:
    """Connected components of the extended graph over the touched balls,
    with each component's participating fibers and directly linked fiber
    pairs."""
    ea, eb = graph.extended
    if ea.size == 0:
        return []
    uf = UnionFind(sys.n_balls)
    for a, b in zip(ea, eb):
        uf.union(int(a), int(b))
    touched = np.unique(np.concatenate([ea, eb]))
    roots = np.fromiter((uf.find(int(b)) for b in touched), dtype=np.int64,
                        count=touched.size)
    by_root: dict[int, list[int]] = {}
    for b, r in zip(touched, roots):
        by_root.setdefault(int(r), []).append(int(b))

    i, j, _ = graph.edges
    pair_root = np.fromiter((uf.find(int(a)) for a in i), dtype=np.int64,
                            count=i.size)
    pairs_by_root: dict[int, set[tuple[int, int]]] = {}
    for a, b, r in zip(i, j, pair_root):
        fa, fb = int(sys.fiber_id[a]), int(sys.fiber_id[b])
        pairs_by_root.setdefault(int(r), set()).add((min(fa, fb), max(fa, fb)))

    out = []
    for r, balls in sorted(by_root.items()):
        barr = np.asarray(balls, dtype=np.int64)
        out.append(Component(
            balls=barr,
            fibers=np.unique(sys.fiber_id[barr]).astype(np.int64),
            fiber_pairs=pairs_by_root.get(r, set()),
        ))
    return out


def contact_stats(comps: list[Component], sys: FiberSystem,
                  counting_mode: str = "component") -> ContactStats:
    """Contact and clot intensities from the component list.

    component mode: a 2-fiber component is one contact, a >= 3 fiber
    component is one clot.  pairwise mode: every fiber pair directly
    linked within a component is one contact; clot counting is unchanged.
    """
    if counting_mode not in ("component", "pairwise"):
        raise ValueError(f"unknown counting_mode {counting_mode!r}")
    n = sys.n_fibers
    vol = sys.window.volume
    per_c = np.zeros(n, dtype=np.int64)
    per_cl = np.zeros(n, dtype=np.int64)
    mult: dict[int, int] = {}
    n_contacts = 0
    n_clots = 0
    for comp in comps:
        k = int(comp.fibers.size)
        mult[k] = mult.get(k, 0) + 1
        if k >= 3:
            n_clots += 1
            per_cl[comp.fibers] += 1
        if counting_mode == "component":
            if k == 2:
                n_contacts += 1
                per_c[comp.fibers] += 1
        else:
            for fa, fb in comp.fiber_pairs:
                n_contacts += 1
                per_c[fa] += 1
                per_c[fb] += 1
    return ContactStats(
        counting_mode=counting_mode,
        n_contacts=n_contacts,
        n_clots=n_clots,
        lambda_c=n_contacts / vol,
        lambda_cF=n_contacts / n if n else 0.0,
        lambda_cl=n_clots / vol,
        lambda_clF=n_clots / n if n else 0.0,
        per_fiber_contacts=per_c,
        per_fiber_clots=per_cl,
        component_fiber_multiplicities=mult,
    )


def analyze(sys: FiberSystem, d: float, counting_mode: str = "component") -> ContactStats:
    graph = closeness_graph(sys, d)
    return contact_stats(components(graph, sys), sys, counting_mode)


def fit_poisson(counts) -> PoissonFit:
    """Maximum-likelihood Poisson fit (mean = sample mean) with a chi-square
    goodness-of-fit over bins pooled to expected counts >= 5."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size == 0:
        raise ValueError("empty histogram")
    mean = float(counts.mean())
    n = counts.size
    kmax = int(counts.max())
    obs = np.bincount(counts, minlength=kmax + 2).astype(np.float64)
    exp = np.array([sstats.poisson.pmf(k, mean) for k in range(kmax + 1)] +
                   [sstats.poisson.sf(kmax, mean)]) * n
    # pool adjacent bins until each expected count reaches 5
    pooled_obs, pooled_exp = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= 5.0:
            pooled_obs.append(acc_o)
            pooled_exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        if pooled_exp:
            pooled_obs[-1] += acc_o
            pooled_exp[-1] += acc_e
        else:
            pooled_obs, pooled_exp = [acc_o], [acc_e]
    po = np.asarray(pooled_obs)
    pe = np.asarray(pooled_exp)
    chi2 = float(((po - pe) ** 2 / pe).sum()) if pe.size else 0.0
    dof = max(int(pe.size) - 2, 1)
    p = float(sstats.chi2.sf(chi2, dof))
    return PoissonFit(mean=mean, chi2=chi2, p_value=p, dof=dof)


def main_directions(sys: FiberSystem) -> np.ndarray:
    """Unit end-to-end chords per fiber, chains unwrapped edge by edge."""
    n, l = sys.n_fibers, sys.l
    out = np.empty((n, 3))
    keep = np.ones(n, dtype=bool)
    warr = sys.window.arr
    for jf in range(n):
        s = sys.fiber_slice(jf)
        xs = sys.x[s]
        chord = np.zeros(3)
        for i in range(l - 1):
            chord += periodic_delta(xs[i], xs[i + 1], warr)
        nrm = np.linalg.norm(chord)
        if nrm < 1e-12:
            keep[jf] = False
            out[jf] = (0.0, 0.0, 1.0)
        else:
            out[jf] = chord / nrm
    return out[keep]


def mean_turning_angle(sys: FiberSystem) -> float:
    """Average interior bending angle over all fibers (curvature monitor)."""
    n, l = sys.n_fibers, sys.l
    if l < 3 or n == 0:
        return float("nan")
    warr = sys.window.arr
    total = 0.0
    count = 0
    for jf in range(n):
        xs = sys.x[sys.fiber_slice(jf)]
        for i in range(1, l - 1):
            a = periodic_delta(xs[i], xs[i - 1], warr)
            c = periodic_delta(xs[i], xs[i + 1], warr)
            cross = np.linalg.norm(np.cross(a, c))
            dot = float(a @ c)
            total += np.arctan2(cross, dot)
            count += 1
    return total / count


def estimate_beta(directions: np.ndarray) -> float:
    """Maximum-likelihood anisotropy parameter from unit main directions.

    The polar-cosine density is beta / (2 (1 + (beta^2 - 1) u^2)^(3/2));
    the 1-D search runs over log beta in [log 0.01, log 100].  A fully
    polar sample pushes the estimate to the lower bound (warned).
    """
    directions = np.asarray(directions, dtype=np.float64)
    if directions.shape[0] < 2:
        raise ValueError("need at least two directions")
    u2 = directions[:, 2] ** 2

    def nll(logb):
        b = np.exp(logb)
        return -(np.log(b) - 1.5 * np.log1p((b * b - 1.0) * u2)).sum()

    res = optimize.minimize_scalar(nll, bounds=(np.log(0.01), np.log(100.0)),
                                   method="bounded",
                                   options={"xatol": 1e-10})
    beta = float(np.exp(res.x))
    if beta <= 0.0101:
        warnings.warn("beta estimate hit the lower search bound "
                      "(degenerate polar alignment)")
    return beta
