"""Numba-accelerated kernel backend.

Same contracts as the numpy backend.  Per-ball accumulation order is fixed
by the grid structure (neighbor cells scanned in a fixed offset order,
balls within a cell in sorted order), so results are bit-identical for any
thread count.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

BACKEND = "numba"


@njit(cache=True, inline="always")
def _mi1(d, w):
    if d >= 0.5 * w:
        return d - w
    if d < -0.5 * w:
        return d + w
    return d


@njit(cache=True, inline="always")
def _smooth(a, a_s, a_e):
    if a_e > a_s:
        if a < a_s:
            return 0.0
        if a > a_e:
            return 1.0
        return 0.5 - 0.5 * math.cos((abs(a) - a_s) / (a_e - a_s) * math.pi)
    return 1.0 if a > a_s else 0.0


@njit(cache=True, inline="always")
def _fallback_dir(i, j):
    h1 = (np.uint64(i) * np.uint64(2654435761) + np.uint64(j) * np.uint64(40503)) & np.uint64(0xFFFFFFFF)
    h2 = (np.uint64(i) * np.uint64(40503) + np.uint64(j) * np.uint64(2654435761)) & np.uint64(0xFFFFFFFF)
    u = 2.0 * (np.float64(h1) / 4294967296.0) - 1.0
    if u < -1.0:
        u = -1.0
    if u > 1.0:
        u = 1.0
    theta = math.acos(u)
    phi = 2.0 * math.pi * (np.float64(h2) / 4294967296.0)
    st = math.sin(theta)
    return st * math.cos(phi), st * math.sin(phi), math.cos(theta)


@njit(cache=True)
def _axis_offsets(n):
    if n >= 3:
        out = np.empty(3, dtype=np.int64)
        out[0] = -1
        out[1] = 0
        out[2] = 1
        return out
    if n == 2:
        out = np.empty(2, dtype=np.int64)
        out[0] = 0
        out[1] = 1
        return out
    out = np.zeros(1, dtype=np.int64)
    return out


@njit(cache=True)
def _cell_of(xb, yb, zb, warr, nc):
    ex = warr[0] / nc[0]
    ey = warr[1] / nc[1]
    ez = warr[2] / nc[2]
    kx = min(max(np.int64(math.floor(xb / ex)), 0), nc[0] - 1)
    ky = min(max(np.int64(math.floor(yb / ey)), 0), nc[1] - 1)
    kz = min(max(np.int64(math.floor(zb / ez)), 0), nc[2] - 1)
    return kx, ky, kz


@njit(cache=True, parallel=True)
def total_forces_kernel(x, fiber_id, chain_idx, ref_angle, l, warr, nc,
                        order, cell_start, r, tau, alpha_s, alpha_e,
                        rho_rec, rho_con, d_c, excl_span,
                        sl_start, sl_partner):
    n = x.shape[0]
    F = np.zeros((n, 3))
    ov_count = np.zeros(n, dtype=np.int64)
    ov_soft = np.zeros(n)
    ov_hard = np.zeros(n)
    rep_cut = 2.0 * (1.0 - tau) * r
    scan_cut = 2.0 * r
    scan2 = scan_cut * scan_cut
    offx = _axis_offsets(nc[0])
    offy = _axis_offsets(nc[1])
    offz = _axis_offsets(nc[2])
    for b in prange(n):
        fx = 0.0
        fy = 0.0
        fz = 0.0
        xb = x[b, 0]
        yb = x[b, 1]
        zb = x[b, 2]
        fb = fiber_id[b]
        cb = chain_idx[b]
        kx, ky, kz = _cell_of(xb, yb, zb, warr, nc)
        for io in range(offx.shape[0]):
            px = (kx + offx[io]) % nc[0]
            for jo in range(offy.shape[0]):
                py = (ky + offy[jo]) % nc[1]
                for ko in range(offz.shape[0]):
                    pz = (kz + offz[ko]) % nc[2]
                    cell = (px * nc[1] + py) * nc[2] + pz
                    for q in range(cell_start[cell], cell_start[cell + 1]):
                        c = order[q]
                        if c == b:
                            continue
                        dx = _mi1(xb - x[c, 0], warr[0])
                        dy = _mi1(yb - x[c, 1], warr[1])
                        dz = _mi1(zb - x[c, 2], warr[2])
                        d2 = dx * dx + dy * dy + dz * dz
                        if d2 >= scan2:
                            continue
                        if fb == fiber_id[c] and abs(cb - chain_idx[c]) <= excl_span:
                            continue
                        dist = math.sqrt(d2)
                        if b < c:
                            hard = 2.0 * r - dist
                            if hard > ov_hard[b]:
                                ov_hard[b] = hard
                            soft = rep_cut - dist
                            if soft > 0.0:
                                ov_count[b] += 1
                                if soft > ov_soft[b]:
                                    ov_soft[b] = soft
                        if dist < rep_cut:
                            mag = 0.5 * (rep_cut - dist)
                            if dist > 0.0:
                                inv = mag / dist
                                fx += inv * dx
                                fy += inv * dy
                                fz += inv * dz
                            else:
                                lo = min(b, c)
                                hi = max(b, c)
                                ux, uy, uz = _fallback_dir(lo, hi)
                                s = 1.0 if b < c else -1.0
                                fx += s * mag * ux
                                fy += s * mag * uy
                                fz += s * mag * uz

        # spring force along chain edges
        for step in range(2):
            nb = b - 1 if step == 0 else b + 1
            if nb < 0 or nb >= n:
                continue
            if fiber_id[nb] != fb:
                continue
            dx = _mi1(xb - x[nb, 0], warr[0])
            dy = _mi1(yb - x[nb, 1], warr[1])
            dz = _mi1(zb - x[nb, 2], warr[2])
            dist = math.sqrt(dx * dx + dy * dy + dz * dz)
            alpha_d = 0.5 * r - dist
            fs = _smooth(2.0 * abs(alpha_d) / r, alpha_s, alpha_e)
            if fs > 0.0 and dist > 0.0:
                inv = rho_rec * fs * alpha_d / dist
                fx += inv * dx
                fy += inv * dy
                fz += inv * dz

        # angle force on interior balls
        if l >= 3 and cb > 0 and cb < l - 1:
            ax = _mi1(x[b - 1, 0] - xb, warr[0])
            ay = _mi1(x[b - 1, 1] - yb, warr[1])
            az = _mi1(x[b - 1, 2] - zb, warr[2])
            cx = _mi1(x[b + 1, 0] - xb, warr[0])
            cy = _mi1(x[b + 1, 1] - yb, warr[1])
            cz = _mi1(x[b + 1, 2] - zb, warr[2])
            L1 = math.sqrt(ax * ax + ay * ay + az * az)
            L2 = math.sqrt(cx * cx + cy * cy + cz * cz)
            crx = ay * cz - az * cy
            cry = az * cx - ax * cz
            crz = ax * cy - ay * cx
            cross = math.sqrt(crx * crx + cry * cry + crz * crz)
            dot = ax * cx + ay * cy + az * cz
            if cross > 1e-12 * L1 * L2:
                theta = math.atan2(cross, dot)
                tref = ref_angle[b]
                fval = _smooth(abs(theta - tref) / math.pi, alpha_s, alpha_e)
                if fval > 0.0:
                    qx = cx - ax
                    qy = cy - ay
                    qz = cz - az
                    D = math.sqrt(qx * qx + qy * qy + qz * qz)
                    mcx = 0.5 * (ax + cx)
                    mcy = 0.5 * (ay + cy)
                    mcz = 0.5 * (az + cz)
                    nhx = qy * crz - qz * cry
                    nhy = qz * crx - qx * crz
                    nhz = qx * cry - qy * crx
                    nn = math.sqrt(nhx * nhx + nhy * nhy + nhz * nhz)
                    if nn > 0.0:
                        nhx /= nn
                        nhy /= nn
                        nhz /= nn
                        if nhx * mcx + nhy * mcy + nhz * mcz > 0.0:
                            nhx = -nhx
                            nhy = -nhy
                            nhz = -nhz
                        wx = ax / L1 + cx / L2
                        wy = ay / L1 + cy / L2
                        wz = az / L1 + cz / L2
                        wn = math.sqrt(wx * wx + wy * wy + wz * wz)
                        if wn > 1e-12:
                            wx /= wn
                            wy /= wn
                            wz /= wn
                            sref = math.sin(tref)
                            t = 0.0
                            if sref < 1e-9:
                                if tref > 0.5 * math.pi:
                                    wdn = wx * nhx + wy * nhy + wz * nhz
                                    if abs(wdn) > 1e-12:
                                        t = (mcx * nhx + mcy * nhy + mcz * nhz) / wdn
                            else:
                                R = D / (2.0 * sref)
                                cdist = 0.5 * D * math.cos(tref) / sref
                                ox = mcx + cdist * nhx
                                oy = mcy + cdist * nhy
                                oz = mcz + cdist * nhz
                                wO = wx * ox + wy * oy + wz * oz
                                disc = wO * wO - (ox * ox + oy * oy + oz * oz - R * R)
                                if disc >= 0.0:
                                    sq = math.sqrt(disc)
                                    best = 0.0
                                    found = False
                                    for sgn in range(2):
                                        root = wO - sq if sgn == 0 else wO + sq
                                        px = root * wx - mcx
                                        py = root * wy - mcy
                                        pz = root * wz - mcz
                                        if px * nhx + py * nhy + pz * nhz > 0.0:
                                            if not found or abs(root) < abs(best):
                                                best = root
                                            found = True
                                    if found:
                                        t = best
                            half_f = 0.5 * rho_rec * fval
                            fx += half_f * t * wx
                            fy += half_f * t * wy
                            fz += half_f * t * wz

        # contact force over shortlist entries
        for q in range(sl_start[b], sl_start[b + 1]):
            c = sl_partner[q]
            dx = _mi1(x[c, 0] - xb, warr[0])
            dy = _mi1(x[c, 1] - yb, warr[1])
            dz = _mi1(x[c, 2] - zb, warr[2])
            dist = math.sqrt(dx * dx + dy * dy + dz * dz)
            de = dist - 2.0 * r
            if de <= 0.0:
                continue
            if d_c > 0.0:
                fc = _smooth(de, 0.0, d_c)
            else:
                fc = 1.0
            if dist > 0.0:
                inv = rho_con * 0.5 * fc * de / dist
                fx += inv * dx
                fy += inv * dy
                fz += inv * dz

        F[b, 0] = fx
        F[b, 1] = fy
        F[b, 2] = fz

    return F, ov_count.sum(), ov_soft.max() if n else 0.0, ov_hard.max() if n else 0.0


def total_forces(x, fiber_id, chain_idx, ref_angle, l, warr, nc,
                 order, cell_start, cells, r, tau, alpha_s, alpha_e,
                 rho_rec, rho_con, d_c, excl_span, sl_b, sl_c):
    n = x.shape[0]
    sl_start, sl_partner = _shortlist_csr(sl_b, sl_c, n)
    F, novr, msoft, mhard = total_forces_kernel(
        x, fiber_id, chain_idx, ref_angle, l, warr, nc, order, cell_start,
        r, tau, alpha_s, alpha_e, rho_rec, rho_con, d_c, excl_span,
        sl_start, sl_partner)
    return F, int(novr), float(max(msoft, 0.0)), float(max(mhard, 0.0))


def _shortlist_csr(sl_b, sl_c, n):
    if sl_b.size == 0:
        return np.zeros(n + 1, dtype=np.int64), np.empty(0, dtype=np.int64)
    ordr = np.lexsort((sl_c, sl_b))
    owner = sl_b[ordr]
    partner = sl_c[ordr]
    start = np.zeros(n + 1, dtype=np.int64)
    np.add.at(start, owner + 1, 1)
    np.cumsum(start, out=start)
    return start, partner


@njit(cache=True)
def _pairs_count(x, warr, nc, order, cell_start, cutoff):
    n = x.shape[0]
    cut2 = cutoff * cutoff
    offx = _axis_offsets(nc[0])
    offy = _axis_offsets(nc[1])
    offz = _axis_offsets(nc[2])
    total = 0
    for b in range(n):
        kx, ky, kz = _cell_of(x[b, 0], x[b, 1], x[b, 2], warr, nc)
        for io in range(offx.shape[0]):
            px = (kx + offx[io]) % nc[0]
            for jo in range(offy.shape[0]):
                py = (ky + offy[jo]) % nc[1]
                for ko in range(offz.shape[0]):
                    pz = (kz + offz[ko]) % nc[2]
                    cell = (px * nc[1] + py) * nc[2] + pz
                    for q in range(cell_start[cell], cell_start[cell + 1]):
                        c = order[q]
                        if c <= b:
                            continue
                        dx = _mi1(x[b, 0] - x[c, 0], warr[0])
                        dy = _mi1(x[b, 1] - x[c, 1], warr[1])
                        dz = _mi1(x[b, 2] - x[c, 2], warr[2])
                        if dx * dx + dy * dy + dz * dz <= cut2:
                            total += 1
    return total


@njit(cache=True)
def _pairs_fill(x, warr, nc, order, cell_start, cutoff, ii, jj, dd):
    n = x.shape[0]
    cut2 = cutoff * cutoff
    offx = _axis_offsets(nc[0])
    offy = _axis_offsets(nc[1])
    offz = _axis_offsets(nc[2])
    m = 0
    for b in range(n):
        kx, ky, kz = _cell_of(x[b, 0], x[b, 1], x[b, 2], warr, nc)
        for io in range(offx.shape[0]):
            px = (kx + offx[io]) % nc[0]
            for jo in range(offy.shape[0]):
                py = (ky + offy[jo]) % nc[1]
                for ko in range(offz.shape[0]):
                    pz = (kz + offz[ko]) % nc[2]
                    cell = (px * nc[1] + py) * nc[2] + pz
                    for q in range(cell_start[cell], cell_start[cell + 1]):
                        c = order[q]
                        if c <= b:
                            continue
                        dx = _mi1(x[b, 0] - x[c, 0], warr[0])
                        dy = _mi1(x[b, 1] - x[c, 1], warr[1])
                        dz = _mi1(x[b, 2] - x[c, 2], warr[2])
                        d2 = dx * dx + dy * dy + dz * dz
                        if d2 <= cut2:
                            ii[m] = b
                            jj[m] = c
                            dd[m] = math.sqrt(d2)
                            m += 1
    return m


def pairs_within(x, warr, nc, order, cell_start, cells, cutoff):
    total = _pairs_count(x, warr, nc, order, cell_start, cutoff)
    ii = np.empty(total, dtype=np.int64)
    jj = np.empty(total, dtype=np.int64)
    dd = np.empty(total)
    _pairs_fill(x, warr, nc, order, cell_start, cutoff, ii, jj, dd)
    return ii, jj, dd


def build_cell_csr(x, warr, nc):
    from . import _numpy as _np_backend
    return _np_backend.build_cell_csr(x, warr, nc)


# ---------------------------------------------------------------------------
# prepack placement index
# ---------------------------------------------------------------------------

@njit(cache=True)
def _insert_balls(pts, start_id, warr, nc, head, nxt, placed):
    for i in range(pts.shape[0]):
        b = start_id + i
        placed[b, 0] = pts[i, 0]
        placed[b, 1] = pts[i, 1]
        placed[b, 2] = pts[i, 2]
        kx, ky, kz = _cell_of(pts[i, 0], pts[i, 1], pts[i, 2], warr, nc)
        cell = (kx * nc[1] + ky) * nc[2] + kz
        nxt[b] = head[cell]
        head[cell] = b


@njit(cache=True)
def _overlap_sum(pts, warr, nc, head, nxt, placed, r):
    offx = _axis_offsets(nc[0])
    offy = _axis_offsets(nc[1])
    offz = _axis_offsets(nc[2])
    total = 0.0
    for i in range(pts.shape[0]):
        kx, ky, kz = _cell_of(pts[i, 0], pts[i, 1], pts[i, 2], warr, nc)
        for io in range(offx.shape[0]):
            px = (kx + offx[io]) % nc[0]
            for jo in range(offy.shape[0]):
                py = (ky + offy[jo]) % nc[1]
                for ko in range(offz.shape[0]):
                    pz = (kz + offz[ko]) % nc[2]
                    cell = (px * nc[1] + py) * nc[2] + pz
                    b = head[cell]
                    while b != -1:
                        dx = _mi1(pts[i, 0] - placed[b, 0], warr[0])
                        dy = _mi1(pts[i, 1] - placed[b, 1], warr[1])
                        dz = _mi1(pts[i, 2] - placed[b, 2], warr[2])
                        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
                        ov = 2.0 * r - dist
                        if ov > 0.0:
                            total += ov
                        b = nxt[b]
    return total


class PlacementIndex:
    """Linked-list cell index over placed balls for prepack trial scoring."""

    def __init__(self, warr, r, capacity):
        self.warr = np.asarray(warr, dtype=np.float64)
        self.r = float(r)
        mincell = 2.0 * r
        self.nc = np.maximum(1, np.floor(self.warr / mincell).astype(np.int64))
        ncell = int(self.nc.prod())
        self.head = np.full(ncell, -1, dtype=np.int64)
        self.nxt = np.full(capacity, -1, dtype=np.int64)
        self.placed = np.empty((capacity, 3))
        self.count = 0

    def add_balls(self, pts):
        _insert_balls(pts, self.count, self.warr, self.nc, self.head,
                      self.nxt, self.placed)
        self.count += pts.shape[0]

    def overlap(self, pts):
        if self.count == 0:
            return 0.0
        return float(_overlap_sum(pts, self.warr, self.nc, self.head,
                                  self.nxt, self.placed, self.r))


# ---------------------------------------------------------------------------
# segment-segment intersection counting
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _segseg_d2(p0x, p0y, p0z, ux, uy, uz, q0x, q0y, q0z, vx, vy, vz):
    w0x = p0x - q0x
    w0y = p0y - q0y
    w0z = p0z - q0z
    a = ux * ux + uy * uy + uz * uz
    b = ux * vx + uy * vy + uz * vz
    c = vx * vx + vy * vy + vz * vz
    d = ux * w0x + uy * w0y + uz * w0z
    e = vx * w0x + vy * w0y + vz * w0z
    den = a * c - b * b
    if den > 1e-12 * a * c:
        s = (b * e - c * d) / den
        if s < 0.0:
            s = 0.0
        elif s > 1.0:
            s = 1.0
    else:
        s = 0.0
    if c > 0.0:
        t = (b * s + e) / c
    else:
        t = 0.0
    if t < 0.0:
        t = 0.0
        if a > 0.0:
            s = -d / a
            if s < 0.0:
                s = 0.0
            elif s > 1.0:
                s = 1.0
    elif t > 1.0:
        t = 1.0
        if a > 0.0:
            s = (b - d) / a
            if s < 0.0:
                s = 0.0
            elif s > 1.0:
                s = 1.0
    gx = w0x + s * ux - t * vx
    gy = w0y + s * uy - t * vy
    gz = w0z + s * uz - t * vz
    return gx * gx + gy * gy + gz * gz


@njit(cache=True, parallel=True)
def segment_pair_counts(centers, axes, half_len, warr, touch):
    m = centers.shape[0]
    counts = np.zeros(m, dtype=np.int64)
    if m < 2:
        return counts
    reach = 2.0 * half_len + touch
    reach2 = reach * reach
    t2 = touch * touch
    for i in prange(m):
        ci = 0
        for j in range(m):
            if j == i:
                continue
            dcx = _mi1(centers[j, 0] - centers[i, 0], warr[0])
            dcy = _mi1(centers[j, 1] - centers[i, 1], warr[1])
            dcz = _mi1(centers[j, 2] - centers[i, 2], warr[2])
            if dcx * dcx + dcy * dcy + dcz * dcz > reach2:
                continue
            hix = axes[i, 0] * half_len
            hiy = axes[i, 1] * half_len
            hiz = axes[i, 2] * half_len
            hjx = axes[j, 0] * half_len
            hjy = axes[j, 1] * half_len
            hjz = axes[j, 2] * half_len
            best = 1e300
            for sx in range(-1, 2):
                for sy in range(-1, 2):
                    for sz in range(-1, 2):
                        qx = dcx + sx * warr[0] - hjx
                        qy = dcy + sy * warr[1] - hjy
                        qz = dcz + sz * warr[2] - hjz
                        d2 = _segseg_d2(-hix, -hiy, -hiz,
                                        2.0 * hix, 2.0 * hiy, 2.0 * hiz,
                                        qx, qy, qz,
                                        2.0 * hjx, 2.0 * hjy, 2.0 * hjz)
                        if d2 < best:
                            best = d2
            if best < t2:
                ci += 1
        counts[i] = ci
    return counts


# ---------------------------------------------------------------------------
# voxel rasterization
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def _rasterize(x, r, spacing, dims, vol):
    nx, ny, nz = dims[0], dims[1], dims[2]
    px = nx * spacing
    py = ny * spacing
    pz = nz * spacing
    span = np.int64(math.ceil(r / spacing)) + 1
    r2 = r * r
    for b in prange(x.shape[0]):
        kx = np.int64(math.floor(x[b, 0] / spacing))
        ky = np.int64(math.floor(x[b, 1] / spacing))
        kz = np.int64(math.floor(x[b, 2] / spacing))
        for i in range(kx - span, kx + span + 1):
            dx = _mi1((i + 0.5) * spacing - x[b, 0], px)
            for j in range(ky - span, ky + span + 1):
                dy = _mi1((j + 0.5) * spacing - x[b, 1], py)
                for k in range(kz - span, kz + span + 1):
                    dz = _mi1((k + 0.5) * spacing - x[b, 2], pz)
                    if dx * dx + dy * dy + dz * dz <= r2:
                        vol[i % nx, j % ny, k % nz] = 1


def rasterize_balls(x, r, spacing, dims):
    vol = np.zeros(tuple(int(d) for d in dims), dtype=np.uint8)
    if x.shape[0]:
        _rasterize(x, float(r), float(spacing),
                   np.asarray(dims, dtype=np.int64), vol)
    return vol
