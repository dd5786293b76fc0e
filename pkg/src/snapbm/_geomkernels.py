"""Compiled primitives on closed polylines and conics.

Polylines are stored as ``(n, 2)`` vertex arrays; segment ``j`` joins vertex
``j`` to vertex ``(j + 1) % n``. A uniform bucket grid over the segments (see
``build_segment_grid``) keeps crossing, containment and near-distance
queries local.
"""

import math

import numba as nb
import numpy as np

INF = np.inf


def build_segment_grid(poly, cell=None):
    """Bucket the segments of a closed polyline into a uniform grid.

    Returns ``(x0, y0, cell, nx, ny, starts, items)`` where the segments
    overlapping cell ``(ix, iy)`` are ``items[starts[c]:starts[c+1]]`` with
    ``c = iy * nx + ix``.
    """
    poly = np.ascontiguousarray(poly, dtype=np.float64)
    n = len(poly)
    seg_len = np.hypot(*(np.roll(poly, -1, axis=0) - poly).T)
    lo = poly.min(axis=0)
    hi = poly.max(axis=0)
    if cell is None:
        span = float(max(hi - lo))
        cell = max(4.0 * float(seg_len.mean()), span / 256.0)
    x0 = lo[0] - cell
    y0 = lo[1] - cell
    nx = int(math.ceil((hi[0] - x0) / cell)) + 2
    ny = int(math.ceil((hi[1] - y0) / cell)) + 2
    starts, items = _fill_grid(poly, x0, y0, cell, nx, ny)
    return x0, y0, cell, nx, ny, starts, items


@nb.njit(cache=True)
def _seg_cells(poly, j, x0, y0, cell):
    n = poly.shape[0]
    ax, ay = poly[j, 0], poly[j, 1]
    bx, by = poly[(j + 1) % n, 0], poly[(j + 1) % n, 1]
    return (int((min(ax, bx) - x0) / cell), int((max(ax, bx) - x0) / cell),
            int((min(ay, by) - y0) / cell), int((max(ay, by) - y0) / cell))


@nb.njit(cache=True)
def _fill_grid(poly, x0, y0, cell, nx, ny):
    n = poly.shape[0]
    starts = np.zeros(nx * ny + 1, dtype=np.int64)
    for j in range(n):
        ix0, ix1, iy0, iy1 = _seg_cells(poly, j, x0, y0, cell)
        for iy in range(iy0, iy1 + 1):
            for ix in range(ix0, ix1 + 1):
                starts[iy * nx + ix + 1] += 1
    for c in range(nx * ny):
        starts[c + 1] += starts[c]
    items = np.empty(starts[-1], dtype=np.int64)
    fill = starts[:-1].copy()
    for j in range(n):
        ix0, ix1, iy0, iy1 = _seg_cells(poly, j, x0, y0, cell)
        for iy in range(iy0, iy1 + 1):
            for ix in range(ix0, ix1 + 1):
                c = iy * nx + ix
                items[fill[c]] = j
                fill[c] += 1
    return starts, items


@nb.njit(cache=True, inline="always")
def seg_point_dist2(px, py, ax, ay, bx, by):
    ex = bx - ax
    ey = by - ay
    ee = ex * ex + ey * ey
    s = 0.0
    if ee > 0.0:
        s = ((px - ax) * ex + (py - ay) * ey) / ee
        s = min(1.0, max(0.0, s))
    qx = ax + s * ex - px
    qy = ay + s * ey - py
    return qx * qx + qy * qy, s


@nb.njit(cache=True)
def poly_pip_one(px, py, poly, x0, y0, cell, nx, ny, starts, items):
    """Even-odd containment of one point using the row of the bucket grid.

    Each crossing of the rightward ray is counted only in the cell that
    contains the crossing abscissa, so segments spanning several cells are
    not double counted.
    """
    n = poly.shape[0]
    iy = int(math.floor((py - y0) / cell))
    if iy < 0 or iy >= ny:
        return False
    ix_start = int(math.floor((px - x0) / cell))
    if ix_start >= nx:
        return False
    if ix_start < 0:
        ix_start = 0
    inside = False
    for ix in range(ix_start, nx):
        c = iy * nx + ix
        cx0 = x0 + ix * cell
        for q in range(starts[c], starts[c + 1]):
            j = items[q]
            ax, ay = poly[j, 0], poly[j, 1]
            bx, by = poly[(j + 1) % n, 0], poly[(j + 1) % n, 1]
            if (ay > py) != (by > py):
                xc = ax + (py - ay) * (bx - ax) / (by - ay)
                if xc > px and xc >= cx0 and xc < cx0 + cell:
                    inside = not inside
    return inside


@nb.njit(cache=True, parallel=True)
def poly_pip(pts, poly, x0, y0, cell, nx, ny, starts, items):
    out = np.empty(pts.shape[0], dtype=np.bool_)
    for i in nb.prange(pts.shape[0]):
        out[i] = poly_pip_one(pts[i, 0], pts[i, 1], poly, x0, y0, cell, nx, ny,
                              starts, items)
    return out


@nb.njit(cache=True, parallel=True)
def poly_closest(pts, poly):
    """Brute-force nearest point on a closed polyline.

    Returns distances, the nearest segment index and the segment parameter.
    """
    m = pts.shape[0]
    n = poly.shape[0]
    dist = np.empty(m)
    seg = np.empty(m, dtype=np.int64)
    par = np.empty(m)
    for i in nb.prange(m):
        best = INF
        bj = 0
        bs = 0.0
        for j in range(n):
            d2, s = seg_point_dist2(pts[i, 0], pts[i, 1], poly[j, 0], poly[j, 1],
                                    poly[(j + 1) % n, 0], poly[(j + 1) % n, 1])
            if d2 < best:
                best = d2
                bj = j
                bs = s
        dist[i] = math.sqrt(best)
        seg[i] = bj
        par[i] = bs
    return dist, seg, par


@nb.njit(cache=True)
def poly_near_dist(px, py, rmax, poly, x0, y0, cell, nx, ny, starts, items):
    """Distance to the polyline if it is below ``rmax``, else ``inf``."""
    n = poly.shape[0]
    ix0 = max(0, int(math.floor((px - rmax - x0) / cell)))
    ix1 = min(nx - 1, int(math.floor((px + rmax - x0) / cell)))
    iy0 = max(0, int(math.floor((py - rmax - y0) / cell)))
    iy1 = min(ny - 1, int(math.floor((py + rmax - y0) / cell)))
    best = rmax * rmax
    found = False
    for iy in range(iy0, iy1 + 1):
        for ix in range(ix0, ix1 + 1):
            c = iy * nx + ix
            for q in range(starts[c], starts[c + 1]):
                j = items[q]
                d2, s = seg_point_dist2(px, py, poly[j, 0], poly[j, 1],
                                        poly[(j + 1) % n, 0], poly[(j + 1) % n, 1])
                if d2 < best:
                    best = d2
                    found = True
    if found:
        return math.sqrt(best)
    return INF


@nb.njit(cache=True)
def poly_near_point(px, py, rmax, poly, x0, y0, cell, nx, ny, starts, items):
    """Nearest polyline point within ``rmax`` as ``(dist, qx, qy)``; ``dist`` is inf if none."""
    n = poly.shape[0]
    ix0 = max(0, int(math.floor((px - rmax - x0) / cell)))
    ix1 = min(nx - 1, int(math.floor((px + rmax - x0) / cell)))
    iy0 = max(0, int(math.floor((py - rmax - y0) / cell)))
    iy1 = min(ny - 1, int(math.floor((py + rmax - y0) / cell)))
    best = rmax * rmax
    qx = px
    qy = py
    found = False
    for iy in range(iy0, iy1 + 1):
        for ix in range(ix0, ix1 + 1):
            c = iy * nx + ix
            for q in range(starts[c], starts[c + 1]):
                j = items[q]
                ax, ay = poly[j, 0], poly[j, 1]
                bx, by = poly[(j + 1) % n, 0], poly[(j + 1) % n, 1]
                d2, s = seg_point_dist2(px, py, ax, ay, bx, by)
                if d2 < best:
                    best = d2
                    qx = ax + s * (bx - ax)
                    qy = ay + s * (by - ay)
                    found = True
    if found:
        return math.sqrt(best), qx, qy
    return INF, qx, qy


@nb.njit(cache=True)
def segment_hits_poly(ax, ay, bx, by, poly, x0, y0, cell, nx, ny, starts, items):
    """Whether the closed segment ``a -> b`` touches the polyline."""
    n = poly.shape[0]
    dx = bx - ax
    dy = by - ay
    ix0 = max(0, int(math.floor((min(ax, bx) - x0) / cell)))
    ix1 = min(nx - 1, int(math.floor((max(ax, bx) - x0) / cell)))
    iy0 = max(0, int(math.floor((min(ay, by) - y0) / cell)))
    iy1 = min(ny - 1, int(math.floor((max(ay, by) - y0) / cell)))
    for iy in range(iy0, iy1 + 1):
        for ix in range(ix0, ix1 + 1):
            c = iy * nx + ix
            for q in range(starts[c], starts[c + 1]):
                j = items[q]
                px, py = poly[j, 0], poly[j, 1]
                ex = poly[(j + 1) % n, 0] - px
                ey = poly[(j + 1) % n, 1] - py
                den = dx * ey - dy * ex
                if den == 0.0:
                    continue
                wx = px - ax
                wy = py - ay
                t = (wx * ey - wy * ex) / den
                s = (wx * dy - wy * dx) / den
                if 0.0 <= t <= 1.0 and 0.0 <= s <= 1.0:
                    return True
    return False


@nb.njit(cache=True)
def poly_self_intersects(poly, x0, y0, cell, nx, ny, starts, items):
    """Whether any two non-adjacent segments of the polyline intersect."""
    n = poly.shape[0]
    for j in range(n):
        ax, ay = poly[j, 0], poly[j, 1]
        bx, by = poly[(j + 1) % n, 0], poly[(j + 1) % n, 1]
        dx = bx - ax
        dy = by - ay
        ix0 = max(0, int(math.floor((min(ax, bx) - x0) / cell)))
        ix1 = min(nx - 1, int(math.floor((max(ax, bx) - x0) / cell)))
        iy0 = max(0, int(math.floor((min(ay, by) - y0) / cell)))
        iy1 = min(ny - 1, int(math.floor((max(ay, by) - y0) / cell)))
        for iy in range(iy0, iy1 + 1):
            for ix in range(ix0, ix1 + 1):
                c = iy * nx + ix
                for q in range(starts[c], starts[c + 1]):
                    k = items[q]
                    if k <= j + 1 or (j == 0 and k == n - 1):
                        continue
                    px, py = poly[k, 0], poly[k, 1]
                    ex = poly[(k + 1) % n, 0] - px
                    ey = poly[(k + 1) % n, 1] - py
                    den = dx * ey - dy * ex
                    if den == 0.0:
                        continue
                    wx = px - ax
                    wy = py - ay
                    t = (wx * ey - wy * ex) / den
                    s = (wx * dy - wy * dx) / den
                    if 0.0 <= t <= 1.0 and 0.0 <= s <= 1.0:
                        return True
    return False


@nb.njit(cache=True)
def _robust_length(v0, v1):
    a = abs(v0)
    b = abs(v1)
    if a < b:
        a, b = b, a
    if a == 0.0:
        return 0.0
    r = b / a
    return a * math.sqrt(1.0 + r * r)


@nb.njit(cache=True)
def _ellipse_q1(e0, e1, y0, y1):
    # Closest point for e0 >= e1 > 0 and a query in the closed first quadrant.
    if y1 > 0.0:
        if y0 > 0.0:
            z0 = y0 / e0
            z1 = y1 / e1
            g = z0 * z0 + z1 * z1 - 1.0
            if g != 0.0:
                r0 = (e0 / e1) ** 2
                n0 = r0 * z0
                s0 = z1 - 1.0
                s1 = 0.0 if g < 0.0 else _robust_length(n0, z1) - 1.0
                s = 0.0
                for _ in range(200):
                    s = 0.5 * (s0 + s1)
                    if s == s0 or s == s1:
                        break
                    ratio0 = n0 / (s + r0)
                    ratio1 = z1 / (s + 1.0)
                    gg = ratio0 * ratio0 + ratio1 * ratio1 - 1.0
                    if gg > 0.0:
                        s0 = s
                    elif gg < 0.0:
                        s1 = s
                    else:
                        break
                return r0 * y0 / (s + r0), y1 / (s + 1.0)
            return y0, y1
        return 0.0, e1
    numer0 = e0 * y0
    denom0 = e0 * e0 - e1 * e1
    if numer0 < denom0:
        xde0 = numer0 / denom0
        return e0 * xde0, e1 * math.sqrt(max(0.0, 1.0 - xde0 * xde0))
    return e0, 0.0


@nb.njit(cache=True)
def ellipse_closest_local(x, y, a, b):
    """Closest point on the axis-aligned ellipse ``(x/a)^2 + (y/b)^2 = 1``."""
    swap = a < b
    if swap:
        a, b = b, a
        x, y = y, x
    qx, qy = _ellipse_q1(a, b, abs(x), abs(y))
    qx = math.copysign(qx, x)
    qy = math.copysign(qy, y)
    if swap:
        qx, qy = qy, qx
    return qx, qy


@nb.njit(cache=True, parallel=True)
def ellipse_closest(pts, cx, cy, a, b, cos_t, sin_t):
    m = pts.shape[0]
    out = np.empty((m, 2))
    for i in nb.prange(m):
        dx = pts[i, 0] - cx
        dy = pts[i, 1] - cy
        lx = cos_t * dx + sin_t * dy
        ly = -sin_t * dx + cos_t * dy
        qx, qy = ellipse_closest_local(lx, ly, a, b)
        out[i, 0] = cx + cos_t * qx - sin_t * qy
        out[i, 1] = cy + sin_t * qx + cos_t * qy
    return out


@nb.njit(cache=True)
def disconnect_radius(cx, cy, pts, curve_id, prev_idx, next_idx, curve_n, cutoff):
    """Smallest radius at which the open ball around ``(cx, cy)`` meets the
    sampled curves in two or more pieces; ``cutoff`` if none occurs below it.

    Sample points enter the ball in order of distance; each arrival opens a
    new arc unless a cyclic neighbour on its curve is already inside, and a
    curve that is entirely inside closes into a single loop.
    """
    p = pts.shape[0]
    d = np.empty(p)
    cnt = 0
    for j in range(p):
        dj = math.hypot(pts[j, 0] - cx, pts[j, 1] - cy)
        d[j] = dj
        if dj < cutoff:
            cnt += 1
    cand = np.empty(cnt, dtype=np.int64)
    q = 0
    for j in range(p):
        if d[j] < cutoff:
            cand[q] = j
            q += 1
    order = np.argsort(d[cand])
    inside = np.zeros(p, dtype=np.bool_)
    n_in = np.zeros(curve_n.shape[0], dtype=np.int64)
    pieces = 0
    for o in range(cnt):
        j = cand[order[o]]
        inside[j] = True
        k = curve_id[j]
        n_in[k] += 1
        joined = 0
        if inside[prev_idx[j]]:
            joined += 1
        if inside[next_idx[j]] and next_idx[j] != prev_idx[j]:
            joined += 1
        pieces += 1 - joined
        if n_in[k] == curve_n[k]:
            pieces += 1
        if pieces >= 2:
            return d[j]
    return cutoff


@nb.njit(cache=True, parallel=True)
def disconnect_radii(centers, pts, curve_id, prev_idx, next_idx, curve_n, cutoff):
    out = np.empty(centers.shape[0])
    for i in nb.prange(centers.shape[0]):
        out[i] = disconnect_radius(centers[i, 0], centers[i, 1], pts, curve_id,
                                   prev_idx, next_idx, curve_n, cutoff)
    return out
