"""Pure-numpy kernel backend.

Reference implementations of the hot loops: fused neighbor-scan force
evaluation, exact pair queries on the cell grid, segment-segment
intersection counting, and ball rasterization.  Semantics match the numba
backend; this path is selected when numba is unavailable or when
FIBERPACK_KERNELS=numpy.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


# ---------------------------------------------------------------------------
# shared small math
# ---------------------------------------------------------------------------

def _min_image(d, warr):
    d = d - warr * np.round(d / warr)
    # round-half-even can leave a component at exactly +w/2; fold it down
    half = 0.5 * warr
    d = np.where(d >= half, d - warr, d)
    d = np.where(d < -half, d + warr, d)
    return d


def smoothing_array(alpha, alpha_s, alpha_e):
    """Raised-cosine ramp: 0 below alpha_s, 1 above alpha_e."""
    a = np.asarray(alpha, dtype=np.float64)
    if alpha_e > alpha_s:
        t = (np.abs(a) - alpha_s) / (alpha_e - alpha_s)
        mid = 0.5 - 0.5 * np.cos(np.clip(t, 0.0, 1.0) * np.pi)
        return np.where(a < alpha_s, 0.0, np.where(a > alpha_e, 1.0, mid))
    return np.where(a > alpha_s, 1.0, 0.0)


def _fallback_unit(i, j):
    """Deterministic pseudo-random unit vectors keyed by the ball-id pair."""
    h = (np.uint64(i) * np.uint64(2654435761) + np.uint64(j) * np.uint64(40503)) & np.uint64(0xFFFFFFFF)
    h = h.astype(np.float64) / 4294967296.0
    theta = np.arccos(np.clip(2.0 * h - 1.0, -1.0, 1.0))
    h2 = ((np.uint64(i) * np.uint64(40503) + np.uint64(j) * np.uint64(2654435761)) & np.uint64(0xFFFFFFFF)).astype(np.float64) / 4294967296.0
    phi = 2.0 * np.pi * h2
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


# ---------------------------------------------------------------------------
# cell grid plumbing
# ---------------------------------------------------------------------------

def axis_offsets(n):
    if n >= 3:
        return np.array([-1, 0, 1], dtype=np.int64)
    if n == 2:
        return np.array([0, 1], dtype=np.int64)
    return np.array([0], dtype=np.int64)


def cell_coords(x, warr, nc):
    edges = warr / nc
    k = np.floor(x / edges).astype(np.int64)
    return np.clip(k, 0, nc - 1)


def cell_ids(x, warr, nc):
    k = cell_coords(x, warr, nc)
    return (k[:, 0] * nc[1] + k[:, 1]) * nc[2] + k[:, 2]


def build_cell_csr(x, warr, nc):
    """Sort balls by cell; returns (order, cell_start, cells)."""
    cells = cell_ids(x, warr, nc)
    order = np.argsort(cells, kind="stable").astype(np.int64)
    ncell = int(nc[0] * nc[1] * nc[2])
    counts = np.bincount(cells, minlength=ncell)
    cell_start = np.zeros(ncell + 1, dtype=np.int64)
    np.cumsum(counts, out=cell_start[1:])
    return order, cell_start, cells


def _ordered_neighbor_pairs(x, warr, nc, order, cell_start, cells):
    """All ordered pairs (owner, partner) with partner in owner's 27-cell
    periodic neighborhood, owner != partner.  Each ordered pair appears
    exactly once."""
    n = x.shape[0]
    k = cell_coords(x, warr, nc)
    offs = [axis_offsets(int(nc[i])) for i in range(3)]
    owners = []
    partners = []
    counts = np.diff(cell_start)
    for dx in offs[0]:
        for dy in offs[1]:
            for dz in offs[2]:
                pk0 = (k[:, 0] + dx) % nc[0]
                pk1 = (k[:, 1] + dy) % nc[1]
                pk2 = (k[:, 2] + dz) % nc[2]
                pc = (pk0 * nc[1] + pk1) * nc[2] + pk2
                m = counts[pc]
                total = int(m.sum())
                if total == 0:
                    continue
                owner = np.repeat(np.arange(n, dtype=np.int64), m)
                seg = np.repeat(cell_start[pc], m)
                csum = np.cumsum(m) - m
                within = np.arange(total, dtype=np.int64) - np.repeat(csum, m)
                partner = order[seg + within]
                keep = partner != owner
                owners.append(owner[keep])
                partners.append(partner[keep])
    if owners:
        return np.concatenate(owners), np.concatenate(partners)
    return (np.empty(0, dtype=np.int64),) * 2


def pairs_within(x, warr, nc, order, cell_start, cells, cutoff):
    """Exact unordered pairs (i < j) with periodic distance <= cutoff."""
    owner, partner = _ordered_neighbor_pairs(x, warr, nc, order, cell_start, cells)
    keep = owner < partner
    i, j = owner[keep], partner[keep]
    d = _min_image(x[j] - x[i], warr)
    dist = np.sqrt(np.einsum("ij,ij->i", d, d))
    m = dist <= cutoff
    return i[m], j[m], dist[m]


# ---------------------------------------------------------------------------
# fused force evaluation
# ---------------------------------------------------------------------------

def _angle_forces(x, fiber_id, chain_idx, ref_angle, l, warr, alpha_s, alpha_e):
    n = x.shape[0]
    F = np.zeros((n, 3))
    if l < 3:
        return F
    interior = np.nonzero((chain_idx > 0) & (chain_idx < l - 1))[0]
    if interior.size == 0:
        return F
    b = interior
    a = _min_image(x[b - 1] - x[b], warr)   # toward previous ball
    c = _min_image(x[b + 1] - x[b], warr)   # toward next ball
    L1 = np.linalg.norm(a, axis=1)
    L2 = np.linalg.norm(c, axis=1)
    dot = np.einsum("ij,ij->i", a, c)
    crossv = np.cross(a, c)
    cross = np.linalg.norm(crossv, axis=1)
    theta = np.arctan2(cross, dot)
    ok = cross > 1e-12 * L1 * L2          # collinear triples give no force
    dev = np.abs(theta - ref_angle[b]) / np.pi
    fval = smoothing_array(dev, alpha_s, alpha_e)
    ok &= fval > 0.0
    if not ok.any():
        return F
    idx = np.nonzero(ok)[0]
    a, c, L1, L2 = a[idx], c[idx], L1[idx], L2[idx]
    crossv, fval = crossv[idx], fval[idx]
    tref = ref_angle[b][idx]
    q = c - a
    D = np.linalg.norm(q, axis=1)
    mc = 0.5 * (a + c)
    nh = np.cross(q, crossv)
    nh /= np.linalg.norm(nh, axis=1)[:, None]
    toward_b = -np.einsum("ij,ij->i", nh, mc)
    nh *= np.sign(toward_b)[:, None]
    w = a / L1[:, None] + c / L2[:, None]
    wn = np.linalg.norm(w, axis=1)
    good = wn > 1e-12
    w = np.where(good[:, None], w / np.where(wn == 0, 1.0, wn)[:, None], 0.0)
    sref = np.sin(tref)
    t = np.zeros(len(idx))
    straight = sref < 1e-9
    if straight.any():
        wdotn = np.einsum("ij,ij->i", w, nh)
        mcdotn = np.einsum("ij,ij->i", mc, nh)
        safe = np.abs(wdotn) > 1e-12
        t = np.where(straight & safe & (tref > np.pi / 2), mcdotn / np.where(wdotn == 0, 1.0, wdotn), t)
    curved = ~straight
    if curved.any():
        R = D / (2.0 * np.where(straight, 1.0, sref))
        cdist = 0.5 * D * np.cos(tref) / np.where(straight, 1.0, sref)
        O = mc + cdist[:, None] * nh
        wO = np.einsum("ij,ij->i", w, O)
        disc = wO * wO - (np.einsum("ij,ij->i", O, O) - R * R)
        has = curved & (disc >= 0.0) & good
        sq = np.sqrt(np.maximum(disc, 0.0))
        best = np.zeros(len(idx))
        found = np.zeros(len(idx), dtype=bool)
        for root in (wO - sq, wO + sq):
            p = root[:, None] * w
            side = np.einsum("ij,ij->i", p - mc, nh) > 0.0
            cand = has & side
            better = cand & (~found | (np.abs(root) < np.abs(best)))
            best = np.where(better, root, best)
            found |= cand
        t = np.where(curved, np.where(found, best, 0.0), t)
    F[b[idx]] = 0.5 * fval[:, None] * t[:, None] * w
    return F


def total_forces(x, fiber_id, chain_idx, ref_angle, l, warr, nc,
                 order, cell_start, cells, r, tau, alpha_s, alpha_e,
                 rho_rec, rho_con, d_c, excl_span,
                 sl_b, sl_c):
    """Per-ball total force and overlap statistics.

    Returns (F, overlap_pairs, max_overlap_soft, max_overlap_hard) where
    overlap counting uses the softcore threshold 2(1-tau)r and the hardcore
    maximum tracks max(0, 2r - d) over non-excluded pairs.
    """
    n = x.shape[0]
    F = np.zeros((n, 3))
    rep_cut = 2.0 * (1.0 - tau) * r
    scan_cut = 2.0 * r
    owner, partner = _ordered_neighbor_pairs(x, warr, nc, order, cell_start, cells)
    n_overlap = 0
    max_soft = 0.0
    max_hard = 0.0
    if owner.size:
        d = _min_image(x[owner] - x[partner], warr)   # points away from partner
        dist = np.sqrt(np.einsum("ij,ij->i", d, d))
        near = dist < scan_cut
        owner, partner, d, dist = owner[near], partner[near], d[near], dist[near]
        excl = (fiber_id[owner] == fiber_id[partner]) & \
               (np.abs(chain_idx[owner] - chain_idx[partner]) <= excl_span)
        act = ~excl
        if act.any():
            once = act & (owner < partner)
            hard = np.maximum(0.0, 2.0 * r - dist[once])
            soft = np.maximum(0.0, rep_cut - dist[once])
            n_overlap = int(np.count_nonzero(soft > 0.0))
            if hard.size:
                max_hard = float(hard.max())
                max_soft = float(soft.max())
            rep = act & (dist < rep_cut)
            if rep.any():
                io, ip = owner[rep], partner[rep]
                dd, dn = d[rep], dist[rep]
                mag = 0.5 * (rep_cut - dn)
                zero = dn == 0.0
                dirs = np.empty_like(dd)
                nz = ~zero
                dirs[nz] = dd[nz] / dn[nz, None]
                if zero.any():
                    dirs[zero] = _fallback_unit(np.minimum(io[zero], ip[zero]),
                                                np.maximum(io[zero], ip[zero]))
                    sgn = np.where(io[zero] < ip[zero], 1.0, -1.0)
                    dirs[zero] *= sgn[:, None]
                np.add.at(F, io, mag[:, None] * dirs)

    # spring force along chain edges
    gid = np.arange(n, dtype=np.int64)
    for nb in (gid - 1, gid + 1):
        valid = (nb >= 0) & (nb < n)
        valid &= np.where(valid, fiber_id[np.clip(nb, 0, n - 1)] == fiber_id, False)
        bsel = gid[valid]
        csel = nb[valid]
        d = _min_image(x[bsel] - x[csel], warr)
        dist = np.linalg.norm(d, axis=1)
        alpha_d = 0.5 * r - dist
        fs = smoothing_array(2.0 * np.abs(alpha_d) / r, alpha_s, alpha_e)
        mag = fs * alpha_d
        nzd = dist > 0.0
        contrib = np.zeros_like(d)
        contrib[nzd] = (mag[nzd] / dist[nzd])[:, None] * d[nzd]
        F[bsel] += rho_rec * contrib

    # angle force on interior balls
    F += rho_rec * _angle_forces(x, fiber_id, chain_idx, ref_angle, l, warr,
                                 alpha_s, alpha_e)

    # contact force over shortlist entries (both directions listed)
    if sl_b.size:
        d = _min_image(x[sl_c] - x[sl_b], warr)   # points toward partner
        dist = np.linalg.norm(d, axis=1)
        de = np.maximum(0.0, dist - 2.0 * r)
        fc = smoothing_array(de, 0.0, d_c) if d_c > 0 else (de > 0.0).astype(np.float64)
        mag = 0.5 * fc * de
        nzd = dist > 0.0
        contrib = np.zeros_like(d)
        contrib[nzd] = (mag[nzd] / dist[nzd])[:, None] * d[nzd]
        np.add.at(F, sl_b, rho_con * contrib)

    return F, n_overlap, max_soft, max_hard


# ---------------------------------------------------------------------------
# prepack placement index
# ---------------------------------------------------------------------------

class PlacementIndex:
    """Incremental cell lists over already-placed balls for trial scoring."""

    def __init__(self, warr, r, capacity):
        self.warr = np.asarray(warr, dtype=np.float64)
        self.r = float(r)
        mincell = 2.0 * r
        self.nc = np.maximum(1, np.floor(self.warr / mincell).astype(np.int64))
        self.ncell = int(self.nc.prod())
        self.lists = [[] for _ in range(self.ncell)]
        self.x = np.empty((capacity, 3))
        self.count = 0
        self.offs = [axis_offsets(int(self.nc[i])) for i in range(3)]

    def add_balls(self, pts):
        m = pts.shape[0]
        ids = np.arange(self.count, self.count + m)
        self.x[self.count:self.count + m] = pts
        cids = cell_ids(pts, self.warr, self.nc)
        for b, c in zip(ids, cids):
            self.lists[int(c)].append(int(b))
        self.count += m

    def overlap(self, pts):
        """Sum of hardcore overlaps max(0, 2r - d) of pts against placed balls."""
        if self.count == 0:
            return 0.0
        k = cell_coords(pts, self.warr, self.nc)
        total = 0.0
        for i in range(pts.shape[0]):
            cand = []
            for dx in self.offs[0]:
                for dy in self.offs[1]:
                    for dz in self.offs[2]:
                        c0 = (k[i, 0] + dx) % self.nc[0]
                        c1 = (k[i, 1] + dy) % self.nc[1]
                        c2 = (k[i, 2] + dz) % self.nc[2]
                        cand.extend(self.lists[int((c0 * self.nc[1] + c1) * self.nc[2] + c2)])
            if not cand:
                continue
            ids = np.asarray(cand, dtype=np.int64)
            d = _min_image(self.x[ids] - pts[i], self.warr)
            dist = np.sqrt(np.einsum("ij,ij->i", d, d))
            total += float(np.maximum(0.0, 2.0 * self.r - dist).sum())
        return total


# ---------------------------------------------------------------------------
# segment-segment intersection counting (periodic, 27 images)
# ---------------------------------------------------------------------------

def _segseg_dist_sq(p0, u, q0, v):
    """Squared distance between segments [p0, p0+u] and [q0, q0+v] (batched)."""
    w0 = p0 - q0
    a = np.einsum("...i,...i->...", u, u)
    b = np.einsum("...i,...i->...", u, v)
    c = np.einsum("...i,...i->...", v, v)
    d = np.einsum("...i,...i->...", u, w0)
    e = np.einsum("...i,...i->...", v, w0)
    den = a * c - b * b
    s = np.where(den > 1e-12 * a * c, (b * e - c * d) / np.where(den == 0, 1.0, den), 0.0)
    s = np.clip(s, 0.0, 1.0)
    t = np.where(c > 0, (b * s + e) / np.where(c == 0, 1.0, c), 0.0)
    tc = np.clip(t, 0.0, 1.0)
    s = np.where(t != tc, np.clip((b * tc - d) / np.where(a == 0, 1.0, a), 0.0, 1.0), s)
    diff = w0 + s[..., None] * u - tc[..., None] * v
    return np.einsum("...i,...i->...", diff, diff)


def segment_pair_counts(centers, axes, half_len, warr, touch):
    """Per-segment counts of other segments with periodic distance < touch."""
    m = centers.shape[0]
    counts = np.zeros(m, dtype=np.int64)
    if m < 2:
        return counts
    shifts = np.array([[ix, iy, iz] for ix in (-1, 0, 1) for iy in (-1, 0, 1)
                       for iz in (-1, 0, 1)], dtype=np.float64) * warr
    reach = 2.0 * half_len + touch
    t2 = touch * touch
    h = axes * half_len
    for i in range(m - 1):
        dc = _min_image(centers[i + 1:] - centers[i], warr)
        cl = np.linalg.norm(dc, axis=1) <= reach
        js = np.nonzero(cl)[0]
        if js.size == 0:
            continue
        # segment i fixed at the origin frame; translate j over all images
        q0 = dc[js][:, None, :] + shifts[None, :, :] - h[i + 1 + js][:, None, :]
        p0 = np.broadcast_to(-h[i], q0.shape[:-1] + (3,))
        u = np.broadcast_to(2.0 * h[i], q0.shape[:-1] + (3,))
        v = np.broadcast_to(2.0 * h[i + 1 + js][:, None, :], q0.shape)
        d2 = _segseg_dist_sq(p0, u, q0, v).min(axis=1)
        hits = js[d2 < t2]
        counts[i] += hits.size
        counts[i + 1 + hits] += 1
    return counts


# ---------------------------------------------------------------------------
# voxel rasterization
# ---------------------------------------------------------------------------

def rasterize_balls(x, r, spacing, dims):
    """8-bit occupancy raster of the union of balls, periodic clipping.

    A voxel is occupied when its center lies within r of a ball center;
    the raster's own period (dims * spacing) defines the wrap.
    """
    vol = np.zeros(tuple(int(d) for d in dims), dtype=np.uint8)
    nx, ny, nz = (int(d) for d in dims)
    period = np.asarray([nx, ny, nz], dtype=np.float64) * spacing
    span = int(np.ceil(r / spacing)) + 1
    for b in range(x.shape[0]):
        kc = np.floor(x[b] / spacing).astype(np.int64)
        rng = [np.arange(kc[i] - span, kc[i] + span + 1) for i in range(3)]
        ii, jj, kk = np.meshgrid(*rng, indexing="ij")
        cx = (ii + 0.5) * spacing
        cy = (jj + 0.5) * spacing
        cz = (kk + 0.5) * spacing
        dx = cx - x[b, 0]
        dy = cy - x[b, 1]
        dz = cz - x[b, 2]
        dx -= period[0] * np.round(dx / period[0])
        dy -= period[1] * np.round(dy / period[1])
        dz -= period[2] * np.round(dz / period[2])
        inside = dx * dx + dy * dy + dz * dz <= r * r
        vol[ii[inside] % nx, jj[inside] % ny, kk[inside] % nz] = 1
    return vol
