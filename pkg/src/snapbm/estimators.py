"""Empirical laws on a cell grid, and the mixing and density-floor estimates
built from them.

All comparisons between laws use total variation over a shared grid of
square cells clipped to the domain, which approximates the supremum over
events by unions of cells.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import beta

from ._rng import stream_generator
from .errors import EmptyEnsemble, GridMismatch, HorizonTooShort, NotConverged, SmallSample
from .geodesic import geodesic_diameter
from .geometry import DomainSpec, sample_uniform
from .process import Ensemble, SimConfig, simulate_paths

# Stream tags keep the random streams of different experiment stages apart.
TAG_STATIONARY = 1
TAG_MIXING = 1 << 10
TAG_DOEBLIN = 2 << 10

SUBSAMPLES = 4
SPLIT_HALF_LIMIT = 0.05
MIN_EXPECTED_COUNT = 5


@lru_cache(maxsize=32)
def _delta(domain: DomainSpec) -> float:
    return geodesic_diameter(domain)


def default_pitch(domain: DomainSpec) -> float:
    """Default histogram pitch: a sixteenth of the geodesic diameter."""
    return _delta(domain) / 16


class HistogramGrid:
    """Square cells of pitch ``h`` that meet the domain.

    The clipped area of a cell is estimated from a 4x4 lattice of sub-points.
    Points landing in a cell none of whose sub-points is inside are assigned
    to the nearest kept cell. With ``region`` (one sign per barrier) the
    cells are clipped to that region between barriers instead.
    """

    def __init__(self, domain: DomainSpec, h: float, region=None):
        self.domain = domain
        self.h = float(h)
        self.region = None if region is None else tuple(int(s) for s in region)
        poly = domain.boundary.polyline(1024)
        lo, hi = poly.min(axis=0), poly.max(axis=0)
        self.origin = lo - 1e-9 * h
        self.nx = int(math.ceil((hi[0] - self.origin[0]) / h)) + 1
        self.ny = int(math.ceil((hi[1] - self.origin[1]) / h)) + 1
        ix, iy = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        corners = self.origin + h * np.column_stack([ix.ravel(), iy.ravel()])
        sub = (np.arange(SUBSAMPLES) + 0.5) / SUBSAMPLES * h
        sx, sy = np.meshgrid(sub, sub, indexing="ij")
        offs = np.column_stack([sx.ravel(), sy.ravel()])
        pts = (corners[:, None, :] + offs[None]).reshape(-1, 2)
        inside = domain.boundary.contains(pts)
        if self.region is not None:
            inside &= np.all(domain.sides(pts) == np.asarray(self.region), axis=1)
        inside = inside.reshape(len(corners), -1)
        frac = inside.mean(axis=1)
        keep = frac > 0
        self.flat = np.flatnonzero(keep)
        self.fraction = frac[keep]
        self.cell_area = self.fraction * h * h
        self.centers = corners[keep] + h / 2
        self.lookup = -np.ones(self.nx * self.ny, np.int64)
        self.lookup[self.flat] = np.arange(len(self.flat))
        self._tree = cKDTree(self.centers)

    def __len__(self):
        return len(self.flat)

    def same_as(self, other: "HistogramGrid") -> bool:
        return other is self or (self.h == other.h and self.region == other.region
                                 and self.nx == other.nx
                                 and self.ny == other.ny
                                 and np.array_equal(self.origin, other.origin)
                                 and np.array_equal(self.flat, other.flat))

    def cell_index(self, pts) -> np.ndarray:
        pts = np.asarray(pts, float).reshape(-1, 2)
        ij = np.floor((pts - self.origin) / self.h).astype(np.int64)
        ij[:, 0] = np.clip(ij[:, 0], 0, self.nx - 1)
        ij[:, 1] = np.clip(ij[:, 1], 0, self.ny - 1)
        idx = self.lookup[ij[:, 0] * self.ny + ij[:, 1]]
        miss = idx < 0
        if miss.any():
            idx[miss] = self._tree.query(pts[miss])[1]
        return idx

    def uniform(self) -> "GridHistogram":
        """The uniform law on the domain, as cell masses proportional to clipped area."""
        return GridHistogram(self, self.cell_area / self.cell_area.sum(), n_samples=0)


@lru_cache(maxsize=32)
def histogram_grid(domain: DomainSpec, h: float, region=None) -> HistogramGrid:
    return HistogramGrid(domain, h, region)


@dataclass
class GridHistogram:
    """Probability mass per grid cell."""

    grid: HistogramGrid
    mass: np.ndarray
    n_samples: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def centers(self):
        return self.grid.centers

    @property
    def cell_area(self):
        return self.grid.cell_area

    @property
    def h(self):
        return self.grid.h

    def density(self) -> np.ndarray:
        return self.mass / self.grid.cell_area

    def mass_where(self, mask) -> float:
        return float(self.mass[np.asarray(mask)].sum())


def _positions(ensemble) -> np.ndarray:
    if isinstance(ensemble, Ensemble):
        return ensemble.positions
    return np.asarray(ensemble, float).reshape(-1, 2)


def histogram(ensemble, domain: DomainSpec, h: Optional[float] = None,
              grid: Optional[HistogramGrid] = None) -> GridHistogram:
    """Cell masses of an ensemble (or any array of points) on the grid of pitch ``h``."""
    if grid is None:
        grid = histogram_grid(domain, default_pitch(domain) if h is None else float(h))
    pts = _positions(ensemble)
    if len(pts) == 0:
        raise EmptyEnsemble("cannot build a histogram from zero particles")
    counts = np.bincount(grid.cell_index(pts), minlength=len(grid)).astype(float)
    return GridHistogram(grid, counts / len(pts), n_samples=len(pts))


def average(hists, weights=None) -> GridHistogram:
    """Weighted mean of histograms on one grid (equal weights by default)."""
    hists = list(hists)
    g = hists[0].grid
    for p in hists[1:]:
        if not g.same_as(p.grid):
            raise GridMismatch("histograms live on different grids")
    w = np.ones(len(hists)) if weights is None else np.asarray(weights, float)
    w = w / w.sum()
    mass = sum(wi * p.mass for wi, p in zip(w, hists))
    return GridHistogram(g, mass / mass.sum(), n_samples=sum(p.n_samples for p in hists))


def tv_distance(p: GridHistogram, q: GridHistogram) -> float:
    """Total variation distance ``sum |p - q| / 2`` over shared cells."""
    if not p.grid.same_as(q.grid):
        raise GridMismatch("total variation needs histograms on the same grid")
    return float(min(1.0, 0.5 * np.abs(p.mass - q.mass).sum()))


def _pattern_key(signs) -> str:
    return "".join("+" if s > 0 else "-" for s in signs)


def stationary_estimate(domain: DomainSpec, cfg: SimConfig, burn_in: float, *,
                        h: Optional[float] = None, n_snapshots: int = 20) -> GridHistogram:
    """Time-averaged occupancy after ``burn_in``, pooled over particles started uniformly.

    The snapshots are split into an early and a late half; if their
    histograms differ by more than 0.05 in total variation the result is
    flagged as not converged (and a :class:`NotConverged` warning is issued).
    ``diagnostics['component_mass']`` gives the occupancy of each region
    between barriers, keyed by its sign pattern, with a standard error taken
    across independent particles.
    """
    if not 0 <= burn_in < cfg.t_final:
        raise ValueError("burn_in must lie in [0, t_final)")
    grid = histogram_grid(domain, default_pitch(domain) if h is None else float(h))
    rng = stream_generator(cfg.seed, TAG_STATIONARY << 32)
    x0 = sample_uniform(domain, cfg.particles, rng)
    times = np.linspace(burn_in, cfg.t_final, n_snapshots + 1)[1:]
    ens = simulate_paths(domain, cfg, x0, snapshot_times=times, stream_tag=TAG_STATIONARY)
    snaps = ens.snapshots
    half = max(1, n_snapshots // 2)
    early = histogram(snaps[:, :half], domain, grid=grid)
    late = histogram(snaps[:, half:], domain, grid=grid) if n_snapshots > 1 else early
    pooled = histogram(snaps, domain, grid=grid)
    split = tv_distance(early, late)
    converged = split <= SPLIT_HALF_LIMIT
    comp = {}
    if domain.m:
        bits = (ens.snapshot_signs > 0).astype(np.int64) << np.arange(domain.m)
        codes = bits.sum(axis=2)
        for code in np.unique(codes):
            per_particle = (codes == code).mean(axis=1)
            key = _pattern_key([1 if (code >> i) & 1 else -1 for i in range(domain.m)])
            comp[key] = {"mass": float(per_particle.mean()),
                         "stderr": float(per_particle.std(ddof=1) / math.sqrt(len(codes)))
                         if len(codes) > 1 else float("nan")}
    pooled.diagnostics = {"split_half_tv": split, "converged": bool(converged),
                          "burn_in": float(burn_in), "n_snapshots": int(n_snapshots),
                          "component_mass": comp}
    if not converged:
        warnings.warn(f"split-half total variation {split:.3f} exceeds {SPLIT_HALF_LIMIT}",
                      NotConverged, stacklevel=2)
    return pooled


@dataclass
class PiMinEstimate:
    value: float
    cell_center: tuple
    expected_count: float
    small_sample: bool


def pi_min_estimate(pi_hat: GridHistogram) -> PiMinEstimate:
    """Smallest mass per unit area over cells, with the cell achieving it."""
    dens = pi_hat.density()
    k = int(np.argmin(dens))
    expected = float(pi_hat.mass[k] * pi_hat.n_samples) if pi_hat.n_samples else math.inf
    small = expected < MIN_EXPECTED_COUNT
    if small:
        warnings.warn(f"minimum cell holds about {expected:.1f} samples; the density floor "
                      "is noise dominated", SmallSample, stacklevel=2)
    return PiMinEstimate(float(dens[k]), tuple(map(float, pi_hat.centers[k])), expected, small)


def deepest_points(domain: DomainSpec, pitch: Optional[float] = None) -> np.ndarray:
    """For each region between barriers, the sampled point farthest from every curve."""
    pitch = domain.diameter / 64 if pitch is None else pitch
    poly = domain.boundary.polyline(1024)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    gx = np.arange(lo[0] + pitch / 2, hi[0], pitch)
    gy = np.arange(lo[1] + pitch / 2, hi[1], pitch)
    pts = np.array(np.meshgrid(gx, gy)).reshape(2, -1).T
    pts = pts[domain.boundary.contains(pts)]
    clearance = np.min([c.distance(pts) for c in domain.curves], axis=0)
    sides = domain.sides(pts)
    out = []
    for pattern in np.unique(sides, axis=0):
        sel = np.flatnonzero(np.all(sides == pattern, axis=1))
        out.append(pts[sel[np.argmax(clearance[sel])]])
    return np.asarray(out)


def default_start_mesh(domain: DomainSpec, pitch: Optional[float] = None) -> np.ndarray:
    """Grid of pitch ``delta / 8`` inside the domain plus the deepest point of each region."""
    pitch = _delta(domain) / 8 if pitch is None else pitch
    poly = domain.boundary.polyline(1024)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    gx = np.arange(lo[0] + pitch / 2, hi[0], pitch)
    gy = np.arange(lo[1] + pitch / 2, hi[1], pitch)
    pts = np.array(np.meshgrid(gx, gy)).reshape(2, -1).T
    pts = pts[domain.contains(pts)]
    return np.vstack([pts, deepest_points(domain)])


@dataclass
class MixingEstimate:
    """Total variation to the reference law per start and snapshot time.

    ``t_mix_hat`` is infinite when the threshold is never reached, in which
    case ``unbounded`` is set.
    """

    t_mix_hat: float
    start_mesh: np.ndarray
    times: np.ndarray
    tv_curve: np.ndarray
    threshold: float = 0.25
    unbounded: bool = False

    def worst(self) -> np.ndarray:
        return self.tv_curve.max(axis=0)

    def at_threshold(self, threshold: float) -> float:
        ok = np.flatnonzero(self.worst() <= threshold)
        return float(self.times[ok[0]]) if len(ok) else math.inf


def mixing_time_estimate(domain: DomainSpec, cfg: SimConfig, start_mesh=None,
                         snapshot_times=None, *, pi_hat: Optional[GridHistogram] = None,
                         h: Optional[float] = None, threshold: float = 0.25,
                         burn_in: Optional[float] = None) -> MixingEstimate:
    """First snapshot time at which every start is within ``threshold`` of the reference.

    The reference is ``pi_hat`` when given, otherwise a stationary estimate
    from ``cfg`` with burn-in ``burn_in`` (half the horizon by default).
    Each start runs ``cfg.particles`` particles up to ``cfg.t_final``.
    """
    if pi_hat is None:
        burn = cfg.t_final / 2 if burn_in is None else burn_in
        pi_hat = stationary_estimate(domain, cfg, burn, h=h)
    grid = pi_hat.grid
    starts = default_start_mesh(domain) if start_mesh is None else \
        np.asarray(start_mesh, float).reshape(-1, 2)
    if snapshot_times is None:
        snapshot_times = np.linspace(0.0, cfg.t_final, 41)[1:]
    times = np.asarray(snapshot_times, float)
    tv = np.zeros((len(starts), len(times)))
    for j, x0 in enumerate(starts):
        ens = simulate_paths(domain, cfg, x0, snapshot_times=times, stream_tag=TAG_MIXING + j)
        for t in range(len(times)):
            tv[j, t] = tv_distance(histogram(ens.snapshots[:, t], domain, grid=grid), pi_hat)
    est = MixingEstimate(math.inf, starts, times, tv, threshold)
    est.t_mix_hat = est.at_threshold(threshold)
    if not math.isfinite(est.t_mix_hat):
        est.unbounded = True
        warnings.warn(f"worst-start total variation stayed above {threshold} up to "
                      f"t={times[-1]:g}", HorizonTooShort, stacklevel=2)
    return est


@dataclass
class DoeblinEstimate:
    """Empirical minorization constant at time ``T``.

    ``C`` is a 95% lower confidence bound (one-sided Clopper-Pearson per
    cell) and ``C_point`` the plain estimate, both minimised over starts and
    cells.
    """

    C: float
    C_point: float
    T: float
    worst_start: tuple
    worst_cell: tuple
    per_start: np.ndarray
    small_sample: bool = False


def lower_confidence(k, n, confidence=0.95):
    """One-sided Clopper-Pearson lower bound for a binomial proportion."""
    k = np.asarray(k, float)
    out = np.zeros_like(k)
    pos = k > 0
    out[pos] = beta.ppf(1 - confidence, k[pos], n - k[pos] + 1)
    return out


def doeblin_constant(domain: DomainSpec, cfg: SimConfig, T: float, start_mesh=None,
                     h: Optional[float] = None, *, confidence: float = 0.95,
                     min_fraction: float = 0.25) -> DoeblinEstimate:
    """Smallest transition mass per unit area at time ``T`` over starts and cells.

    The default cell pitch is ``delta / 8``: the minimum over cells is biased
    low by sampling noise, and coarser cells keep that bias small. Cells
    whose clipped area is below ``min_fraction`` of a full cell are left out
    of the minimum because their area estimate is unreliable.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    grid = histogram_grid(domain, _delta(domain) / 8 if h is None else float(h))
    starts = default_start_mesh(domain) if start_mesh is None else \
        np.asarray(start_mesh, float).reshape(-1, 2)
    run = replace(cfg, t_final=T)
    ok = grid.fraction >= min_fraction
    n = cfg.particles
    per_start = np.zeros(len(starts))
    best = (math.inf, math.inf, None, None, False)
    for j, x0 in enumerate(starts):
        ens = simulate_paths(domain, run, x0, stream_tag=TAG_DOEBLIN + j)
        counts = np.bincount(grid.cell_index(ens.positions), minlength=len(grid))
        low = lower_confidence(counts, n, confidence) / grid.cell_area
        point = counts / n / grid.cell_area
        low[~ok] = np.inf
        point[~ok] = np.inf
        k = int(np.argmin(low))
        per_start[j] = low[k]
        if low[k] < best[0]:
            best = (float(low[k]), float(point[ok].min()), tuple(map(float, x0)),
                    tuple(map(float, grid.centers[k])), counts[k] < MIN_EXPECTED_COUNT)
        else:
            best = (best[0], min(best[1], float(point[ok].min())), *best[2:])
    if best[4]:
        warnings.warn("the minorizing cell holds fewer than 5 samples", SmallSample, stacklevel=2)
    return DoeblinEstimate(best[0], best[1], float(T), best[2], best[3], per_start, best[4])


def write_tv_curve_csv(path, est: MixingEstimate):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["start_x", "start_y", "t", "tv"])
        for j, (x, y) in enumerate(est.start_mesh):
            for t, v in zip(est.times, est.tv_curve[j]):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(t)), repr(float(v))])


def write_pi_hat_csv(path, hist: GridHistogram):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell_x", "cell_y", "mass", "cell_area"])
        for (x, y), m, a in zip(hist.centers, hist.mass, hist.cell_area):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(m)), repr(float(a))])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return obj


def write_summary_json(path, summary: dict):
    """Write a summary dictionary with sorted keys; non-finite numbers become strings."""
    with open(path, "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def histogram_svg(hist: GridHistogram, path, scale: float = 400.0):
    """Heat map of cell densities (linear white-to-red colour map)."""
    g = hist.grid
    dens = hist.density()
    top = dens.max() if dens.max() > 0 else 1.0
    size = scale / max(g.nx, g.ny)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{g.nx * size:.1f}" '
             f'height="{g.ny * size:.1f}">']
    for flat, d in zip(g.flat, dens):
        i, j = divmod(int(flat), g.ny)
        v = int(round(255 * (1 - d / top)))
        parts.append(f'<rect x="{i * size:.2f}" y="{(g.ny - 1 - j) * size:.2f}" '
                     f'width="{size:.2f}" height="{size:.2f}" fill="rgb(255,{v},{v})"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
