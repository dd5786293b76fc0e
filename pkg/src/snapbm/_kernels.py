"""Compiled Euler stepping for snapping-out Brownian motion.

Curve ``0`` is the outer boundary, curves ``1..m`` are barriers. Arrays
indexed by curve therefore have length ``m + 1``; entry 0 of sign arrays is
always +1 and its local time and budget are unused.

Geometry is passed as the tuple produced by :func:`compile_domain`.
"""

import math

import numba as nb
import numpy as np

from ._geomkernels import (ellipse_closest_local, poly_near_dist, poly_near_point,
                           poly_pip_one)
from ._rng import box_muller, uniforms4

KIND_CIRCLE = 0
KIND_ELLIPSE = 1
KIND_POLY = 2

MAX_REFLECTIONS = 16
NO_HIT = 2.0
INF = np.inf
OK = 0
STUCK = 1


def compile_domain(domain):
    """Flatten the curves of a domain into arrays for the kernels."""
    from .geometry import Circle, Ellipse

    curves = domain.curves
    nc = len(curves)
    kinds = np.zeros(nc, dtype=np.int64)
    cpar = np.zeros((nc, 6))
    poff = np.zeros(nc, dtype=np.int64)
    pn = np.zeros(nc, dtype=np.int64)
    gf = np.zeros((nc, 3))
    gi = np.zeros((nc, 4), dtype=np.int64)
    pts, starts, items = [np.zeros((0, 2))], [np.zeros(0, np.int64)], [np.zeros(0, np.int64)]
    p_off = s_off = i_off = 0
    for k, c in enumerate(curves):
        if isinstance(c, Circle):
            kinds[k] = KIND_CIRCLE
            cpar[k] = (c.center[0], c.center[1], c.radius, c.radius, 1.0, 0.0)
        elif isinstance(c, Ellipse):
            kinds[k] = KIND_ELLIPSE
            cpar[k] = (c.center[0], c.center[1], c.a, c.b,
                       math.cos(c.rotation), math.sin(c.rotation))
        else:
            kinds[k] = KIND_POLY
            poly = c._dense[1]
            x0, y0, cell, nx, ny, st, it = c.grid
            poff[k], pn[k] = p_off, len(poly)
            gf[k] = (x0, y0, cell)
            gi[k] = (nx, ny, s_off, i_off)
            pts.append(poly)
            starts.append(st)
            items.append(it)
            p_off += len(poly)
            s_off += len(st)
            i_off += len(it)
    return (kinds, cpar, np.ascontiguousarray(np.concatenate(pts)), poff, pn, gf, gi,
            np.concatenate(starts), np.concatenate(items))


@nb.njit(cache=True)
def _hit_conic(par, px, py, dx, dy, side):
    cx, cy, a, b, co, si = par[0], par[1], par[2], par[3], par[4], par[5]
    rx = px - cx
    ry = py - cy
    ux = (co * rx + si * ry) / a
    uy = (-si * rx + co * ry) / b
    vx = (co * dx + si * dy) / a
    vy = (-si * dx + co * dy) / b
    A = vx * vx + vy * vy
    if A == 0.0:
        return NO_HIT, 0.0, 0.0
    B = 2.0 * (ux * vx + uy * vy)
    C = ux * ux + uy * uy - 1.0
    disc = B * B - 4.0 * A * C
    if side < 0 and B >= 0.0:
        return NO_HIT, 0.0, 0.0
    if disc < 0.0:
        return NO_HIT, 0.0, 0.0
    sq = math.sqrt(disc)
    q = -0.5 * (B + math.copysign(sq, B))
    if q == 0.0:
        r1 = 0.0
        r2 = 0.0
    else:
        r1 = q / A
        r2 = C / q
    if side > 0:
        t = max(r1, r2)
    else:
        t = min(r1, r2)
    if t > 1.0:
        return NO_HIT, 0.0, 0.0
    if t < 0.0:
        t = 0.0
    hx = (ux + t * vx) / a
    hy = (uy + t * vy) / b
    nx = co * hx - si * hy
    ny = si * hx + co * hy
    nn = math.hypot(nx, ny)
    return t, nx / nn, ny / nn


@nb.njit(cache=True)
def _hit_poly(k, geo, px, py, dx, dy, tmin):
    pts, poff, pn, gf, gi, gst, git = geo[2], geo[3], geo[4], geo[5], geo[6], geo[7], geo[8]
    n = pn[k]
    o = poff[k]
    x0, y0, cell = gf[k, 0], gf[k, 1], gf[k, 2]
    gnx, gny, so, io = gi[k, 0], gi[k, 1], gi[k, 2], gi[k, 3]
    ix0 = max(0, int(math.floor((min(px, px + dx) - x0) / cell)))
    ix1 = min(gnx - 1, int(math.floor((max(px, px + dx) - x0) / cell)))
    iy0 = max(0, int(math.floor((min(py, py + dy) - y0) / cell)))
    iy1 = min(gny - 1, int(math.floor((max(py, py + dy) - y0) / cell)))
    best = NO_HIT
    bnx = 0.0
    bny = 0.0
    for iy in range(iy0, iy1 + 1):
        for ix in range(ix0, ix1 + 1):
            c = so + iy * gnx + ix
            for q in range(gst[c], gst[c + 1]):
                j = git[io + q]
                ax = pts[o + j, 0]
                ay = pts[o + j, 1]
                j2 = j + 1
                if j2 == n:
                    j2 = 0
                ex = pts[o + j2, 0] - ax
                ey = pts[o + j2, 1] - ay
                den = dx * ey - dy * ex
                if den == 0.0:
                    continue
                wx = ax - px
                wy = ay - py
                t = (wx * ey - wy * ex) / den
                if t <= tmin or t > 1.0 or t >= best:
                    continue
                s = (wx * dy - wy * dx) / den
                if s < 0.0 or s > 1.0:
                    continue
                best = t
                el = math.hypot(ex, ey)
                bnx = -ey / el
                bny = ex / el
    return best, bnx, bny


@nb.njit(cache=True)
def curve_distance(k, geo, px, py, rmax):
    """Distance from a point to curve ``k``; ``inf`` for polylines beyond ``rmax``."""
    kind = geo[0][k]
    par = geo[1][k]
    if kind == KIND_CIRCLE:
        return abs(math.hypot(px - par[0], py - par[1]) - par[2])
    if kind == KIND_ELLIPSE:
        rx = px - par[0]
        ry = py - par[1]
        lx = par[4] * rx + par[5] * ry
        ly = -par[5] * rx + par[4] * ry
        qx, qy = ellipse_closest_local(lx, ly, par[2], par[3])
        return math.hypot(lx - qx, ly - qy)
    pts, poff, pn, gf, gi, gst, git = geo[2], geo[3], geo[4], geo[5], geo[6], geo[7], geo[8]
    o = poff[k]
    nx, ny, so, io = gi[k, 0], gi[k, 1], gi[k, 2], gi[k, 3]
    ncell = nx * ny
    starts = gst[so:so + ncell + 1]
    items = git[io:io + starts[ncell]]
    return poly_near_dist(px, py, rmax, pts[o:o + pn[k]], gf[k, 0], gf[k, 1], gf[k, 2],
                          nx, ny, starts, items)


@nb.njit(cache=True)
def curve_project(k, geo, px, py, rmax):
    """Nearest point of curve ``k`` and whether ``(px, py)`` is on its positive side.

    Returns ``(dist, qx, qy, inside)``; for polylines only points within
    ``rmax`` are found (``dist`` is inf otherwise).
    """
    kind = geo[0][k]
    par = geo[1][k]
    if kind == KIND_POLY:
        pts, poff, pn, gf, gi, gst, git = geo[2], geo[3], geo[4], geo[5], geo[6], geo[7], geo[8]
        o = poff[k]
        nx, ny, so, io = gi[k, 0], gi[k, 1], gi[k, 2], gi[k, 3]
        ncell = nx * ny
        starts = gst[so:so + ncell + 1]
        items = git[io:io + starts[ncell]]
        poly = pts[o:o + pn[k]]
        d, qx, qy = poly_near_point(px, py, rmax, poly, gf[k, 0], gf[k, 1], gf[k, 2],
                                    nx, ny, starts, items)
        inside = poly_pip_one(px, py, poly, gf[k, 0], gf[k, 1], gf[k, 2], nx, ny,
                              starts, items)
        return d, qx, qy, inside
    rx = px - par[0]
    ry = py - par[1]
    lx = par[4] * rx + par[5] * ry
    ly = -par[5] * rx + par[4] * ry
    inside = (lx / par[2]) ** 2 + (ly / par[3]) ** 2 <= 1.0
    if kind == KIND_CIRCLE:
        r = math.hypot(lx, ly)
        if r == 0.0:
            return par[2], par[0] + par[2], par[1], True
        qlx = lx * par[2] / r
        qly = ly * par[2] / r
    else:
        qlx, qly = ellipse_closest_local(lx, ly, par[2], par[3])
    qx = par[0] + par[4] * qlx - par[5] * qly
    qy = par[1] + par[5] * qlx + par[4] * qly
    return math.hypot(lx - qlx, ly - qly), qx, qy, inside


@nb.njit(cache=True)
def draw_exponential(seed, stream, counter, rate):
    u, _, _, _ = uniforms4(seed, stream, counter)
    return -math.log(u) / rate


@nb.njit(cache=True)
def step_one(geo, lam_p, lam_m, pos, sign, ltime, budget, flips, dt, bridge,
             seed, stream, counter):
    """Advance one particle by one Euler step, in place.

    Returns ``(counter, status)``. Each step consumes one random block for the
    Gaussian increment; sign flips and bridge events draw further blocks.
    """
    kinds = geo[0]
    cpar = geo[1]
    nc = kinds.shape[0]
    sdt = math.sqrt(dt)
    u0, u1, _, _ = uniforms4(seed, stream, counter)
    counter += 1
    g1, g2 = box_muller(u0, u1)
    px = pos[0]
    py = pos[1]
    sx = px
    sy = py
    dx = sdt * g1
    dy = sdt * g2
    last = -1
    skip = -1
    status = OK
    touched = 0
    for it in range(MAX_REFLECTIONS + 2):
        best = NO_HIT
        bk = -1
        bnx = 0.0
        bny = 0.0
        for k in range(nc):
            if k == skip:
                continue
            if kinds[k] == KIND_POLY:
                tmin = 1e-9 if k == last else 0.0
                t, nx, ny = _hit_poly(k, geo, px, py, dx, dy, tmin)
            else:
                t, nx, ny = _hit_conic(cpar[k], px, py, dx, dy, sign[k])
            if t < best:
                best = t
                bk = k
                bnx = nx
                bny = ny
        if bk < 0:
            px += dx
            py += dy
            break
        if it >= MAX_REFLECTIONS:
            status = STUCK
            break
        if nc <= 64:
            touched |= 1 << bk
        if bk == last:
            # A shallow step along the inside of a convex stretch would retrace
            # ever shorter chords; mirror the endpoint through the curve instead.
            ex = px + dx
            ey = py + dy
            rmax = 2.0 * math.hypot(dx, dy) + 1e-12
            dist, cx, cy, inside = curve_project(bk, geo, ex, ey, rmax)
            allowed = inside if sign[bk] > 0 else not inside
            skip = bk
            if allowed or dist == INF:
                continue
            push = 2.0 * dist
            if bk > 0 and budget[bk] <= push:
                ltime[bk] += budget[bk]
                sign[bk] = -sign[bk]
                flips[bk] += 1
                rate = lam_m[bk] if sign[bk] > 0 else lam_p[bk]
                budget[bk] = draw_exponential(seed, stream, counter, rate)
                counter += 1
                px = cx
                py = cy
                dx = ex - cx
                dy = ey - cy
                continue
            if bk > 0:
                ltime[bk] += push
                budget[bk] -= push
            mx = 2.0 * cx - ex
            my = 2.0 * cy - ey
            _, _, _, m_inside = curve_project(bk, geo, mx, my, rmax)
            if m_inside == inside:
                mx = cx
                my = cy
            px = cx
            py = cy
            dx = mx - cx
            dy = my - cy
            continue
        skip = -1
        qx = px + best * dx
        qy = py + best * dy
        rx = (1.0 - best) * dx
        ry = (1.0 - best) * dy
        rn = rx * bnx + ry * bny
        push = 2.0 * abs(rn)
        reflect = True
        if bk > 0:
            if budget[bk] > push:
                ltime[bk] += push
                budget[bk] -= push
            else:
                ltime[bk] += budget[bk]
                sign[bk] = -sign[bk]
                flips[bk] += 1
                rate = lam_m[bk] if sign[bk] > 0 else lam_p[bk]
                budget[bk] = draw_exponential(seed, stream, counter, rate)
                counter += 1
                reflect = False
        if reflect:
            rx -= 2.0 * rn * bnx
            ry -= 2.0 * rn * bny
        px = qx
        py = qy
        dx = rx
        dy = ry
        last = bk
    if bridge and status == OK:
        band = 3.0 * sdt
        for k in range(1, nc):
            if nc <= 64 and (touched >> k) & 1:
                continue
            d1 = curve_distance(k, geo, sx, sy, band)
            if d1 >= band:
                continue
            d2 = curve_distance(k, geo, px, py, band)
            if d2 >= band:
                continue
            ua, ub, uc, _ = uniforms4(seed, stream, counter)
            counter += 1
            if ua < math.exp(-2.0 * d1 * d2 / dt):
                z, _ = box_muller(ub, uc)
                inc = 0.5 * math.sqrt(dt * math.pi / 2.0) * abs(z)
                ltime[k] += inc
                # An exhausted budget flips at the next geometric contact.
                budget[k] = max(0.0, budget[k] - inc)
    pos[0] = px
    pos[1] = py
    return counter, status


@nb.njit(cache=True)
def init_budgets(sign, budget, lam_p, lam_m, seed, stream, counter):
    for k in range(1, sign.shape[0]):
        rate = lam_m[k] if sign[k] > 0 else lam_p[k]
        budget[k] = draw_exponential(seed, stream, counter, rate)
        counter += 1
    return counter


@nb.njit(cache=True, parallel=True)
def run_ensemble(geo, lam_p, lam_m, pos, sign, ltime, budget, flips, counter, streams,
                 seed, dt, nsteps, bridge, snap_steps, snap_pos, snap_sign, snap_lt,
                 stop_center, stop_r, hit_step, status):
    """Advance every particle ``nsteps`` steps, recording snapshots.

    ``snap_steps`` are sorted step indices (0 is the initial state). With
    ``stop_r > 0`` a particle stops the first time it is farther than
    ``stop_r`` from ``stop_center``; its step index goes to ``hit_step`` and
    later snapshots repeat its final state.
    """
    n = pos.shape[0]
    ns = snap_steps.shape[0]
    stop_r2 = stop_r * stop_r
    for i in nb.prange(n):
        stream = streams[i]
        c = counter[i]
        j = 0
        while j < ns and snap_steps[j] == 0:
            snap_pos[i, j, 0] = pos[i, 0]
            snap_pos[i, j, 1] = pos[i, 1]
            snap_sign[i, j, :] = sign[i, :]
            snap_lt[i, j, :] = ltime[i, :]
            j += 1
        for s in range(1, nsteps + 1):
            c, st = step_one(geo, lam_p, lam_m, pos[i], sign[i], ltime[i], budget[i],
                             flips[i], dt, bridge, seed, stream, c)
            if st != OK:
                status[i] = st
                hit_step[i] = s
                break
            while j < ns and snap_steps[j] == s:
                snap_pos[i, j, 0] = pos[i, 0]
                snap_pos[i, j, 1] = pos[i, 1]
                snap_sign[i, j, :] = sign[i, :]
                snap_lt[i, j, :] = ltime[i, :]
                j += 1
            if stop_r > 0.0:
                ex = pos[i, 0] - stop_center[0]
                ey = pos[i, 1] - stop_center[1]
                if ex * ex + ey * ey > stop_r2:
                    hit_step[i] = s
                    break
        while j < ns:
            snap_pos[i, j, 0] = pos[i, 0]
            snap_pos[i, j, 1] = pos[i, 1]
            snap_sign[i, j, :] = sign[i, :]
            snap_lt[i, j, :] = ltime[i, :]
            j += 1
        counter[i] = c


@nb.njit(cache=True, parallel=True)
def pill_bridge_hits(seed, stream_base, n, R, yx, yy, eps, gamma, n_steps):
    """Tube indicators for ``n`` grid Brownian paths conditioned to end in ``B(y, eps)``.

    Path ``i`` reads stream ``stream_base + i``. Its endpoint has the
    Gaussian law ``N(0, R^2 I)`` restricted to the ball (rejection from the
    uniform law on the ball); interior grid points follow the sequential
    Brownian bridge, stopping at the first exit from the tube.
    """
    out = np.zeros(n, np.uint8)
    T = R * R
    dt = T / n_steps
    tube2 = (gamma * R) ** 2
    ny = math.hypot(yx, yy)
    dmin = max(0.0, ny - eps)
    for i in nb.prange(n):
        stream = stream_base + np.uint64(i)
        c = 0
        while True:
            u1, u2, u3, _ = uniforms4(seed, stream, c)
            c += 1
            r = eps * math.sqrt(u1)
            ex = yx + r * math.cos(2.0 * math.pi * u2)
            ey = yy + r * math.sin(2.0 * math.pi * u2)
            if u3 <= math.exp(-(ex * ex + ey * ey - dmin * dmin) / (2.0 * T)):
                break
        x = 0.0
        y = 0.0
        ok = True
        for k in range(n_steps - 1):
            rem = n_steps - k
            sd = math.sqrt(dt * (rem - 1) / rem)
            u1, u2, _, _ = uniforms4(seed, stream, c)
            c += 1
            g1, g2 = box_muller(u1, u2)
            x += (ex - x) / rem + sd * g1
            y += (ey - y) / rem + sd * g2
            s = (k + 1) / n_steps
            dx = x - s * yx
            dy = y - s * yy
            if dx * dx + dy * dy > tube2:
                ok = False
                break
        if ok:
            out[i] = 1
    return out
