"""Shortest paths inside the domain.

Paths may cross barriers freely; only the outer curve obstructs them. The
graph is the 8-connected grid of nodes inside the domain with Euclidean edge
weights, and a string-pulling pass removes most of the grid's metrication.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import PointOutsideDomain
from .geometry import DomainSpec

# 8-connected grid paths overestimate straight lengths by at most this factor.
_METRICATION = 1.0 / math.cos(math.pi / 8)
_NEIGHBOURS = [(1, 0), (0, 1), (1, 1), (1, -1)]


def default_pitch(domain: DomainSpec) -> float:
    return domain.diameter / 96


def visible(domain: DomainSpec, a, b) -> np.ndarray:
    """Whether the straight segments ``a[k] -> b[k]`` stay inside the domain."""
    return domain.boundary.segments_inside(a, b)


class GridGraph:
    """Grid nodes inside the domain and the visibility-filtered edges."""

    def __init__(self, domain: DomainSpec, h: float):
        self.domain = domain
        self.h = h
        poly = domain.boundary.polyline(512)
        lo, hi = poly.min(axis=0), poly.max(axis=0)
        gx = np.arange(lo[0], hi[0] + h, h)
        gy = np.arange(lo[1], hi[1] + h, h)
        X, Y = np.meshgrid(gx, gy, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        inside = domain.boundary.contains(pts)
        index = -np.ones(len(pts), dtype=np.int64)
        index[inside] = np.arange(inside.sum())
        index = index.reshape(X.shape)
        self.nodes = pts[inside]
        rows, cols, wts = [], [], []
        ni, nj = index.shape
        for di, dj in _NEIGHBOURS:
            a = index[:ni - di, max(0, -dj):nj - max(0, dj)]
            b = index[di:, max(0, dj):nj - max(0, -dj)]
            ok = (a >= 0) & (b >= 0)
            a, b = a[ok], b[ok]
            vis = visible(domain, self.nodes[a], self.nodes[b])
            a, b = a[vis], b[vis]
            rows.append(a)
            cols.append(b)
            wts.append(np.full(len(a), h * math.hypot(di, dj)))
        self.rows = np.concatenate(rows)
        self.cols = np.concatenate(cols)
        self.wts = np.concatenate(wts)

    def attach(self, points):
        """Edges from extra points to visible grid nodes within two pitches."""
        points = np.atleast_2d(np.asarray(points, float))
        n = len(self.nodes)
        rows, cols, wts = [], [], []
        for k, p in enumerate(points):
            d = np.hypot(*(self.nodes - p).T)
            near = np.flatnonzero(d <= 2.0 * self.h)
            if len(near) == 0:
                near = np.argsort(d)[:8]
            vis = visible(self.domain, np.repeat(p[None], len(near), 0), self.nodes[near])
            near = near[vis]
            rows.append(np.full(len(near), n + k))
            cols.append(near)
            wts.append(d[near])
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(wts)

    def augmented(self, points):
        r, c, w = self.attach(points)
        n = len(self.nodes) + len(np.atleast_2d(points))
        rows = np.concatenate([self.rows, r])
        cols = np.concatenate([self.cols, c])
        wts = np.concatenate([self.wts, w])
        g = coo_matrix((wts, (rows, cols)), shape=(n, n)).tocsr()
        coords = np.vstack([self.nodes, np.atleast_2d(points)])
        return g, coords


@lru_cache(maxsize=8)
def _grid_graph(domain: DomainSpec, h: float) -> GridGraph:
    return GridGraph(domain, h)


def _path(pred, src, dst):
    out = [dst]
    while out[-1] != src:
        nxt = pred[out[-1]]
        if nxt < 0:
            return None
        out.append(nxt)
    return out[::-1]


def pull_string(domain: DomainSpec, path: np.ndarray) -> np.ndarray:
    """Shortcut a polygonal path wherever a straight segment stays inside."""
    out = [path[0]]
    i = 0
    last = len(path) - 1
    while i < last:
        j = i + 1
        while j < last and visible(domain, path[i], path[j + 1])[0]:
            j += 1
        out.append(path[j])
        i = j
    return np.asarray(out)


def _length(path):
    return float(np.hypot(*np.diff(path, axis=0).T).sum())


def geodesic_distance(domain: DomainSpec, x, y, h: float | None = None) -> float:
    """Length of the shortest path from ``x`` to ``y`` that stays in the domain."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    inside = domain.contains(np.vstack([x, y]))
    if not inside.all():
        raise PointOutsideDomain("both endpoints must lie in the domain")
    # Symmetry is exact because the endpoints are put in a canonical order.
    if tuple(y) < tuple(x):
        x, y = y, x
    if visible(domain, x, y)[0]:
        return float(math.hypot(*(y - x)))
    h = default_pitch(domain) if h is None else h
    g, coords = _grid_graph(domain, h).augmented(np.vstack([x, y]))
    src, dst = len(coords) - 2, len(coords) - 1
    dist, pred = dijkstra(g, directed=False, indices=src, return_predecessors=True)
    if not np.isfinite(dist[dst]):
        raise PointOutsideDomain("no path found inside the domain at this grid pitch")
    path = coords[_path(pred, src, dst)]
    return _length(pull_string(domain, path))


def geodesic_diameter(domain: DomainSpec, h: float | None = None,
                      n_boundary: int = 128) -> float:
    """Largest geodesic distance between points sampled along the outer curve.

    Straight-visible pairs contribute their Euclidean distance exactly. Other
    pairs are ranked by grid distance and string-pulled in decreasing order
    until no remaining pair can beat the best value, given the grid's bounded
    overestimate. The result is never below the Euclidean diameter.
    """
    h = default_pitch(domain) if h is None else h
    b = domain.boundary
    ring = b.polyline(n_boundary)
    ring = ring + 1e-7 * domain.diameter * b.inward_normal(b.closest(ring))
    ia, ib = np.triu_indices(n_boundary, 1)
    euclid = np.hypot(*(ring[ia] - ring[ib]).T)
    vis = visible(domain, ring[ia], ring[ib])
    best = max(float(euclid[vis].max()) if vis.any() else 0.0, domain.diameter)
    if vis.all():
        return best
    g, coords = _grid_graph(domain, h).augmented(ring)
    base = len(coords) - n_boundary
    src = base + np.arange(n_boundary)
    dist, pred = dijkstra(g, directed=False, indices=src, return_predecessors=True)
    hidden = np.flatnonzero(~vis)
    grid_d = dist[ia[hidden], base + ib[hidden]]
    order = np.argsort(grid_d)[::-1]
    for k in order:
        if grid_d[k] / _METRICATION - 2 * h < best:
            break
        i, j = ia[hidden[k]], ib[hidden[k]]
        path = _path(pred[i], base + i, base + j)
        if path is None:
            continue
        best = max(best, _length(pull_string(domain, coords[path])))
    return best
