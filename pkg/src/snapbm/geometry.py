"""Planar domains with semipermeable barriers and their geometric parameters.

A :class:`DomainSpec` holds an impermeable outer curve and a list of
:class:`Barrier` curves. Curves are circles, ellipses or closed periodic
cubic splines, all oriented counterclockwise; the positive side of a curve
is the closure of its bounded component and normals point into it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import ConvexHull

from . import _geomkernels as gk
from .errors import (ConfigError, DegenerateGeometry, InvalidGeometry,
                     PointNotOnCurve)

DENSE_SAMPLES = 4096
SAGITTA_LIMIT = 1e-7
MAX_DENSE = 1 << 17
TAU_REL = 1e-9


def _as_points(x):
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    return np.atleast_2d(pts), single


def _rot(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


class Curve:
    """Common interface of the three curve kinds."""

    kind = "curve"

    def polyline(self, n: int = DENSE_SAMPLES) -> np.ndarray:
        raise NotImplementedError

    def contains(self, pts) -> np.ndarray:
        """Whether points lie in the closed bounded component."""
        raise NotImplementedError

    def closest(self, pts) -> np.ndarray:
        raise NotImplementedError

    def inward_normal(self, q) -> np.ndarray:
        """Unit normals at points ``q`` already on the curve."""
        raise NotImplementedError

    def max_curvature(self) -> float:
        raise NotImplementedError

    def enclosed_area(self) -> float:
        raise NotImplementedError

    def moved(self, angle: float, shift) -> "Curve":
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    is_convex = False

    def distance(self, pts):
        p, single = _as_points(pts)
        d = np.hypot(*(self.closest(p) - p).T)
        return d[0] if single else d

    def length(self) -> float:
        poly = self.polyline(DENSE_SAMPLES)
        return float(np.hypot(*(np.roll(poly, -1, axis=0) - poly).T).sum())

    def bbox_diagonal(self) -> float:
        poly = self.polyline(512)
        return float(np.hypot(*(poly.max(axis=0) - poly.min(axis=0))))

    def segments_inside(self, a, b) -> np.ndarray:
        """Whether the segments ``a[k] -> b[k]`` stay in the closed region."""
        a = np.atleast_2d(np.asarray(a, float))
        b = np.atleast_2d(np.asarray(b, float))
        return self.contains(a) & self.contains(b)


@dataclass(frozen=True)
class Circle(Curve):
    center: tuple
    radius: float
    kind = "circle"
    is_convex = True

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if not self.radius > 0:
            raise InvalidGeometry("circle radius must be positive")

    def polyline(self, n=DENSE_SAMPLES):
        th = 2 * np.pi * np.arange(n) / n
        return np.column_stack([self.center[0] + self.radius * np.cos(th),
                                self.center[1] + self.radius * np.sin(th)])

    def contains(self, pts):
        p, single = _as_points(pts)
        d2 = (p[:, 0] - self.center[0]) ** 2 + (p[:, 1] - self.center[1]) ** 2
        out = d2 <= self.radius ** 2
        return out[0] if single else out

    def closest(self, pts):
        p, _ = _as_points(pts)
        v = p - np.asarray(self.center)
        r = np.hypot(v[:, 0], v[:, 1])
        at_center = r == 0
        v[at_center] = (1.0, 0.0)
        r[at_center] = 1.0
        return np.asarray(self.center) + self.radius * v / r[:, None]

    def distance(self, pts):
        p, single = _as_points(pts)
        d = np.abs(np.hypot(p[:, 0] - self.center[0], p[:, 1] - self.center[1])
                   - self.radius)
        return d[0] if single else d

    def inward_normal(self, q):
        q, _ = _as_points(q)
        v = np.asarray(self.center) - q
        return v / np.hypot(*v.T)[:, None]

    def max_curvature(self):
        return 1.0 / self.radius

    def enclosed_area(self):
        return math.pi * self.radius ** 2

    def length(self):
        return 2 * math.pi * self.radius

    def bbox_diagonal(self):
        return 2 * math.sqrt(2) * self.radius

    def moved(self, angle, shift):
        c = _rot(angle) @ np.asarray(self.center) + np.asarray(shift, float)
        return Circle(tuple(c), self.radius)

    def to_dict(self):
        return {"type": "circle", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Ellipse(Curve):
    center: tuple
    a: float
    b: float
    rotation: float = 0.0
    kind = "ellipse"
    is_convex = True

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if not (self.a > 0 and self.b > 0):
            raise InvalidGeometry("ellipse semi-axes must be positive")

    def _local(self, p):
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        d = p - np.asarray(self.center)
        return np.column_stack([c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1]])

    def polyline(self, n=DENSE_SAMPLES):
        th = 2 * np.pi * np.arange(n) / n
        loc = np.column_stack([self.a * np.cos(th), self.b * np.sin(th)])
        return loc @ _rot(self.rotation).T + np.asarray(self.center)

    def contains(self, pts):
        p, single = _as_points(pts)
        loc = self._local(p)
        out = (loc[:, 0] / self.a) ** 2 + (loc[:, 1] / self.b) ** 2 <= 1.0
        return out[0] if single else out

    def closest(self, pts):
        p, _ = _as_points(pts)
        return gk.ellipse_closest(np.ascontiguousarray(p), self.center[0], self.center[1],
                                  self.a, self.b, math.cos(self.rotation),
                                  math.sin(self.rotation))

    def inward_normal(self, q):
        q, _ = _as_points(q)
        loc = self._local(q)
        g = np.column_stack([loc[:, 0] / self.a ** 2, loc[:, 1] / self.b ** 2])
        g = -(g @ _rot(self.rotation).T)
        return g / np.hypot(*g.T)[:, None]

    def max_curvature(self):
        return max(self.a / self.b ** 2, self.b / self.a ** 2)

    def enclosed_area(self):
        return math.pi * self.a * self.b

    def moved(self, angle, shift):
        c = _rot(angle) @ np.asarray(self.center) + np.asarray(shift, float)
        return Ellipse(tuple(c), self.a, self.b, self.rotation + angle)

    def to_dict(self):
        return {"type": "ellipse", "center": list(self.center),
                "semi_axes": [self.a, self.b], "rotation": self.rotation}


@dataclass(frozen=True, eq=False)
class Spline(Curve):
    """Closed curve through ``points`` by periodic cubic interpolation.

    The parameter is cumulative chord length of the control polygon. Control
    points given clockwise are reversed so the curve runs counterclockwise.
    """

    points: tuple
    kind = "spline"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
            raise InvalidGeometry("spline needs at least three 2D control points")
        if np.allclose(pts[0], pts[-1]):
            pts = pts[:-1]
        x, y = pts.T
        if 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) < 0:
            pts = pts[::-1]
        object.__setattr__(self, "points", tuple(map(tuple, pts.tolist())))

    def __eq__(self, other):
        return isinstance(other, Spline) and self.points == other.points

    def __hash__(self):
        return hash(self.points)

    @cached_property
    def _spline(self):
        pts = np.asarray(self.points + (self.points[0],))
        chord = np.hypot(*np.diff(pts, axis=0).T)
        if np.any(chord <= 0):
            raise InvalidGeometry("spline has repeated consecutive control points")
        t = np.concatenate([[0.0], np.cumsum(chord)])
        return CubicSpline(t, pts, bc_type="periodic")

    @property
    def period(self) -> float:
        return float(self._spline.x[-1])

    def polyline(self, n=DENSE_SAMPLES):
        u = self.period * np.arange(n) / n
        return self._spline(u)

    @cached_property
    def _dense(self):
        # The dense polyline is the curve every numeric query and the simulation
        # see, so it is refined until it sits within SAGITTA_LIMIT of the spline.
        n = DENSE_SAMPLES
        while True:
            u = self.period * np.arange(n) / n
            poly = np.ascontiguousarray(self._spline(u))
            seg = np.hypot(*(np.roll(poly, -1, axis=0) - poly).T)
            if np.any(seg <= 0):
                raise InvalidGeometry("spline sampling produced coincident points")
            if self.max_curvature() * seg.max() ** 2 / 8 <= SAGITTA_LIMIT or n >= MAX_DENSE:
                return u, poly
            n *= 2

    @cached_property
    def grid(self):
        return gk.build_segment_grid(self._dense[1])

    def contains(self, pts):
        p, single = _as_points(pts)
        out = gk.poly_pip(np.ascontiguousarray(p), self._dense[1], *self.grid)
        return out[0] if single else out

    def _closest_param(self, p):
        u, poly = self._dense
        _, seg, par = gk.poly_closest(np.ascontiguousarray(p), poly)
        du = self.period / len(u)
        t = u[seg] + par * du
        d1 = self._spline.derivative(1)
        d2 = self._spline.derivative(2)
        for _ in range(4):
            r = self._spline(t) - p
            v = d1(t)
            f = np.sum(r * v, axis=1)
            fp = np.sum(v * v, axis=1) + np.sum(r * d2(t), axis=1)
            t = t - np.clip(f / fp, -du, du)
        return np.mod(t, self.period)

    def closest(self, pts):
        p, _ = _as_points(pts)
        return self._spline(self._closest_param(p))

    def inward_normal(self, q):
        q, _ = _as_points(q)
        v = self._spline.derivative(1)(self._closest_param(q))
        v = v / np.hypot(*v.T)[:, None]
        return np.column_stack([-v[:, 1], v[:, 0]])

    def curvature(self, n=DENSE_SAMPLES):
        u = self.period * np.arange(n) / n
        v = self._spline.derivative(1)(u)
        a = self._spline.derivative(2)(u)
        cross = v[:, 0] * a[:, 1] - v[:, 1] * a[:, 0]
        return np.abs(cross) / np.hypot(*v.T) ** 3

    def max_curvature(self):
        return float(self.curvature(DENSE_SAMPLES).max())

    def enclosed_area(self):
        x, y = self.polyline(4 * DENSE_SAMPLES).T
        return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def segments_inside(self, a, b):
        a = np.atleast_2d(np.asarray(a, float))
        b = np.atleast_2d(np.asarray(b, float))
        ok = self.contains(a) & self.contains(b)
        poly = self._dense[1]
        grid = self.grid
        for k in np.flatnonzero(ok):
            if gk.segment_hits_poly(a[k, 0], a[k, 1], b[k, 0], b[k, 1], poly, *grid):
                ok[k] = False
        return ok

    def is_simple(self) -> bool:
        return not gk.poly_self_intersects(self._dense[1], *self.grid)

    def moved(self, angle, shift):
        pts = np.asarray(self.points) @ _rot(angle).T + np.asarray(shift, float)
        return Spline(tuple(map(tuple, pts.tolist())))

    def to_dict(self):
        return {"type": "spline", "points": [list(p) for p in self.points]}


def curve_from_dict(d: dict) -> Curve:
    try:
        kind = d["type"]
        if kind == "circle":
            return Circle(tuple(d["center"]), float(d["radius"]))
        if kind == "ellipse":
            a, b = d["semi_axes"]
            return Ellipse(tuple(d.get("center", (0.0, 0.0))), float(a), float(b),
                           float(d.get("rotation", 0.0)))
        if kind == "spline":
            return Spline(tuple(map(tuple, d["points"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad curve {d!r}: {exc}") from exc
    raise ConfigError(f"unknown curve type {d.get('type')!r}")


@dataclass(frozen=True)
class Barrier:
    curve: Curve
    lambda_plus: float
    lambda_minus: float

    def __post_init__(self):
        if not (self.lambda_plus > 0 and self.lambda_minus > 0):
            raise InvalidGeometry("barrier permeabilities must be positive")

    def to_dict(self):
        d = dict(self.curve.to_dict())
        d.update(lambda_plus=self.lambda_plus, lambda_minus=self.lambda_minus)
        return d


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Outer impermeable curve plus semipermeable barriers inside it.

    Barrier ``i`` of the mathematical setup is ``barriers[i - 1]`` here; the
    outer curve plays the role of curve 0 and always has sign +1.
    """

    boundary: Curve
    barriers: tuple = ()
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "barriers", tuple(self.barriers))
        if self.validate:
            self.check()

    @property
    def curves(self) -> list:
        return [self.boundary] + [b.curve for b in self.barriers]

    @property
    def m(self) -> int:
        return len(self.barriers)

    @cached_property
    def diameter(self) -> float:
        """Euclidean diameter of the sampled outer curve."""
        poly = self.boundary.polyline(DENSE_SAMPLES)
        hull = poly[ConvexHull(poly).vertices]
        d = np.hypot(hull[:, None, 0] - hull[None, :, 0], hull[:, None, 1] - hull[None, :, 1])
        return float(d.max())

    @property
    def tau(self) -> float:
        return TAU_REL * self.diameter

    def check(self):
        """Raise :class:`InvalidGeometry` unless the assumptions on the curves hold."""
        tau = self.tau
        for c in self.curves:
            if isinstance(c, Spline) and not c.is_simple():
                raise InvalidGeometry("spline curve intersects itself")
        samples = [c.polyline(1024) for c in self.curves]
        for i, b in enumerate(self.barriers, start=1):
            if not np.all(self.boundary.contains(samples[i])):
                raise InvalidGeometry(f"barrier {i} leaves the outer curve")
            if self.boundary.distance(samples[i]).min() <= tau:
                raise InvalidGeometry(f"barrier {i} touches the outer curve")
        for i in range(1, len(samples)):
            for j in range(i + 1, len(samples)):
                inside = self.curves[j].contains(samples[i])
                if inside.any() and not inside.all():
                    raise InvalidGeometry(f"barriers {i} and {j} intersect")
                if self.curves[j].distance(samples[i]).min() <= tau:
                    raise InvalidGeometry(f"barriers {i} and {j} touch")

    def contains(self, pts):
        """Membership in the closed domain, with ``tau`` slack at the outer curve."""
        p, single = _as_points(pts)
        out = self.boundary.contains(p)
        if not out.all():
            miss = ~out
            out[miss] = self.boundary.distance(p[miss]) <= self.tau
        return out[0] if single else out

    def sides(self, pts) -> np.ndarray:
        """Per-barrier side (+1/-1) for each point, shape ``(n, m)``."""
        p, _ = _as_points(pts)
        return np.column_stack([side_of(b, p, self.tau) for b in self.barriers]) \
            if self.barriers else np.zeros((len(p), 0), dtype=int)

    def moved(self, angle: float, shift) -> "DomainSpec":
        return DomainSpec(self.boundary.moved(angle, shift),
                          tuple(Barrier(b.curve.moved(angle, shift), b.lambda_plus,
                                        b.lambda_minus) for b in self.barriers))

    def with_rates(self, lambda_plus, lambda_minus) -> "DomainSpec":
        lp = np.broadcast_to(lambda_plus, (self.m,))
        lm = np.broadcast_to(lambda_minus, (self.m,))
        return DomainSpec(self.boundary, tuple(Barrier(b.curve, float(p), float(q))
                                               for b, p, q in zip(self.barriers, lp, lm)),
                          validate=False)

    def to_dict(self) -> dict:
        return {"boundary": self.boundary.to_dict(),
                "barriers": [b.to_dict() for b in self.barriers]}

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        if "boundary" not in d:
            raise ConfigError("domain config needs a 'boundary' entry")
        barriers = []
        for k, bd in enumerate(d.get("barriers", []), start=1):
            try:
                lp, lm = float(bd["lambda_plus"]), float(bd["lambda_minus"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"barrier {k}: missing or bad permeability ({exc})") from exc
            barriers.append(Barrier(curve_from_dict(bd), lp, lm))
        try:
            return cls(curve_from_dict(d["boundary"]), tuple(barriers))
        except InvalidGeometry as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "DomainSpec":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "DomainSpec":
        return cls.from_json(Path(path).read_text())

    def dump(self, path):
        Path(path).write_text(self.to_json(indent=2) + "\n")


def side_of(barrier, x, tau: Optional[float] = None):
    """+1 if ``x`` is on the closed positive side of the barrier, else -1.

    Points within ``tau`` of the curve are reported as +1.
    """
    curve = barrier.curve if isinstance(barrier, Barrier) else barrier
    p, single = _as_points(x)
    if tau is None:
        tau = TAU_REL * curve.bbox_diagonal()
    inside = np.asarray(curve.contains(p), dtype=bool)
    if not inside.all():
        miss = ~inside
        inside[miss] = curve.distance(p[miss]) <= tau
    out = np.where(inside, 1, -1)
    return int(out[0]) if single else out


def normal_at(curve, x, tau: Optional[float] = None) -> np.ndarray:
    """Unit normal at a point of the curve, pointing into the bounded side."""
    curve = curve.curve if isinstance(curve, Barrier) else curve
    if tau is None:
        tau = TAU_REL * curve.bbox_diagonal()
    p = np.asarray(x, dtype=float).reshape(1, 2)
    if curve.distance(p)[0] > tau:
        raise PointNotOnCurve(f"{tuple(p[0])} is farther than {tau:g} from the curve")
    n = curve.inward_normal(curve.closest(p))[0]
    return n / math.hypot(*n)


def max_curvature(domain: DomainSpec) -> float:
    return max(c.max_curvature() for c in domain.curves)


def area(domain: DomainSpec) -> float:
    """Area enclosed by the outer curve; barriers do not remove area."""
    return domain.boundary.enclosed_area()


@dataclass(frozen=True)
class RhoEstimate:
    value: float
    pitch: float
    center: Optional[tuple]
    capped: bool


def _curve_samples(domain, spacing):
    pts, ids, prev, nxt, counts = [], [], [], [], []
    off = 0
    for k, c in enumerate(domain.curves):
        n = int(np.clip(math.ceil(c.length() / spacing), 256, 16384))
        pts.append(c.polyline(n))
        idx = np.arange(n)
        ids.append(np.full(n, k))
        prev.append(off + (idx - 1) % n)
        nxt.append(off + (idx + 1) % n)
        counts.append(n)
        off += n
    return (np.ascontiguousarray(np.concatenate(pts)), np.concatenate(ids),
            np.concatenate(prev), np.concatenate(nxt), np.asarray(counts))


def estimate_rho(domain: DomainSpec, keep: int = 512, rel_pitch: float = 0.01) -> RhoEstimate:
    """Largest radius below which every ball centred in the domain meets the
    union of curves in a connected set.

    Centres are refined adaptively: a coarse grid over the domain, then
    repeated 3x3 subdivision around the ``keep`` centres whose first
    disconnection radius is within two pitches of the running minimum, until
    the pitch falls below ``rel_pitch`` times the estimate. The result is
    capped at the Euclidean diameter when no disconnection occurs.
    """
    diam = domain.diameter
    samples = _curve_samples(domain, diam / 1024)
    poly = domain.boundary.polyline(512)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    pitch = diam / 32
    gx = np.arange(lo[0] + pitch / 2, hi[0], pitch)
    gy = np.arange(lo[1] + pitch / 2, hi[1], pitch)
    centers = np.array(np.meshgrid(gx, gy)).reshape(2, -1).T
    centers = centers[domain.boundary.contains(centers)]
    radii = gk.disconnect_radii(centers, *samples, diam)
    best = float(radii.min())
    arg = centers[int(radii.argmin())]
    while best < diam and pitch > rel_pitch * best:
        sel = np.flatnonzero(radii < best + 2 * pitch)
        sel = sel[np.argsort(radii[sel])[:keep]]
        pitch /= 3
        offs = pitch * np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], float)
        centers = (centers[sel][:, None, :] + offs[None]).reshape(-1, 2)
        centers = centers[domain.boundary.contains(centers)]
        radii = gk.disconnect_radii(centers, *samples, min(diam, best + 2 * pitch))
        if radii.min() < best:
            best = float(radii.min())
            arg = centers[int(radii.argmin())]
    capped = best >= diam
    value = min(best, diam)
    if value < 10 * domain.tau:
        raise DegenerateGeometry(f"separation {value:g} is below the geometric tolerance")
    return RhoEstimate(value, pitch, None if capped else tuple(arg), capped)


def separation_rho(domain: DomainSpec) -> float:
    return estimate_rho(domain).value


@dataclass(frozen=True)
class GeometryReport:
    kappa: float
    rho: float
    delta: float
    area: float
    lambda_min: Optional[float]
    lambda_max: Optional[float]
    R: float
    c: float = 1.0

    def to_dict(self):
        return dict(self.__dict__)


def permeability_range(domain: DomainSpec):
    """``(lambda_min, lambda_max)`` over barriers only; ``(None, None)`` if none."""
    if not domain.barriers:
        return None, None
    rates = [r for b in domain.barriers for r in (b.lambda_plus, b.lambda_minus)]
    return min(rates), max(rates)


def geometry_report(domain: DomainSpec, c: float = 1.0, delta: Optional[float] = None,
                    rho: Optional[float] = None) -> GeometryReport:
    """Aggregate curvature, separation, diameter, area and permeability range.

    Without barriers the permeability fields are ``None`` and ``R`` uses
    only ``1/kappa`` and ``rho``.
    """
    from .geodesic import geodesic_diameter

    if not c > 0:
        raise ValueError("c must be positive")
    kappa = max_curvature(domain)
    rho = separation_rho(domain) if rho is None else rho
    delta = geodesic_diameter(domain) if delta is None else delta
    lmin, lmax = permeability_range(domain)
    scales = [1.0 / kappa, rho] + ([1.0 / lmax] if lmax else [])
    return GeometryReport(kappa, rho, delta, area(domain), lmin, lmax, c * min(scales), c)


def sample_uniform(domain: DomainSpec, n: int, rng: np.random.Generator,
                   region: Optional[Sequence[int]] = None) -> np.ndarray:
    """Rejection-sample ``n`` uniform points in the domain.

    ``region`` optionally restricts to the component with the given
    per-barrier sides.
    """
    poly = domain.boundary.polyline(512)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    out = []
    have = 0
    tried = 0
    while have < n:
        size = max(1024, 2 * (n - have))
        batch = rng.uniform(lo, hi, size=(size, 2))
        batch = batch[domain.boundary.contains(batch)]
        if region is not None and len(batch):
            batch = batch[np.all(domain.sides(batch) == np.asarray(region), axis=1)]
        out.append(batch)
        have += len(batch)
        tried += size
        if have == 0 and tried >= 1_000_000:
            raise ValueError(f"no point of the domain lies in region {tuple(region)}")
    return np.concatenate(out)[:n]
