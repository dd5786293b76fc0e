"""Ready-made domains: nested circles, a disk with one barrier, and test fixtures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Barrier, Circle, DomainSpec, Ellipse, Spline

MODES = ("metastable", "outward")


def nested_circles(n: int, lambda_base: float = 1.0, bias: float = 4.0,
                   mode: str = "metastable") -> DomainSpec:
    """Outer circle of radius ``2n+1`` with barrier circles at radii ``2n, ..., 1``.

    Barrier ``i`` (1-based, outermost first) has radius ``2n + 1 - i``. In
    ``outward`` mode every barrier is easier to leave than to enter
    (``lambda_plus = lambda_base / bias``, ``lambda_minus = lambda_base``), so
    the stationary law thins out towards the centre. In ``metastable`` mode the
    outer ``n`` barriers are like that and the inner ``n`` have the rates
    swapped, which creates a second trap around the centre.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not bias > 0 or not lambda_base > 0:
        raise ValueError("lambda_base and bias must be positive")
    slow, fast = lambda_base / bias, lambda_base
    barriers = []
    for i in range(1, 2 * n + 1):
        if mode == "outward" or i <= n:
            lp, lm = slow, fast
        else:
            lp, lm = fast, slow
        barriers.append(Barrier(Circle((0.0, 0.0), float(2 * n + 1 - i)), lp, lm))
    return DomainSpec(Circle((0.0, 0.0), float(2 * n + 1)), tuple(barriers))


def disk_one_barrier(Rb: float = 0.5, lp: float = 1.0, lm: float = 1.0) -> DomainSpec:
    """Unit disk with one concentric barrier circle of radius ``Rb``."""
    if not 0 < Rb < 1:
        raise ValueError("Rb must lie in (0, 1)")
    return DomainSpec(Circle((0.0, 0.0), 1.0), (Barrier(Circle((0.0, 0.0), Rb), lp, lm),))


def disk_plain(radius: float = 1.0) -> DomainSpec:
    return DomainSpec(Circle((0.0, 0.0), radius))


def _arc(r, a0, a1, n):
    t = np.linspace(a0, a1, n, endpoint=False)
    return np.column_stack([r * np.cos(t), r * np.sin(t)])


def crescent_points(inner: float = 0.5, outer: float = 1.0, opening: float = math.pi / 2,
                    spacing: float = 0.05) -> np.ndarray:
    """Control points of a C-shaped region between two concentric arcs.

    The region spans polar angles ``|theta| <= pi - opening / 2`` and has
    semicircular end caps; the gap faces the negative x-axis.
    """
    half = math.pi - opening / 2
    mid, w = (inner + outer) / 2, (outer - inner) / 2
    pieces = [_arc(outer, -half, half, max(8, int(outer * 2 * half / spacing)))]
    end = np.array([mid * math.cos(half), mid * math.sin(half)])
    pieces.append(end + _arc(w, half, half + math.pi, max(6, int(w * math.pi / spacing))))
    inner_pts = _arc(inner, half, -half, max(8, int(inner * 2 * half / spacing)))
    pieces.append(inner_pts)
    end2 = np.array([mid * math.cos(-half), mid * math.sin(-half)])
    pieces.append(end2 + _arc(w, -half + math.pi, -half + 2 * math.pi,
                              max(6, int(w * math.pi / spacing))))
    return np.vstack(pieces)


def nonconvex_spline(barrier: bool = True) -> DomainSpec:
    """C-shaped (crescent) domain, optionally with a small barrier circle in one arm."""
    boundary = Spline(crescent_points())
    barriers = (Barrier(Circle((0.75, 0.0), 0.1), 1.0, 1.0),) if barrier else ()
    return DomainSpec(boundary, barriers)


def rounded_rectangle_points(width: float = 4.0, height: float = 2.0,
                             corner: float = 0.2, spacing: float = 0.1) -> np.ndarray:
    hx, hy = width / 2 - corner, height / 2 - corner
    pts = []
    corners = [(hx, hy, 0.0), (-hx, hy, math.pi / 2), (-hx, -hy, math.pi), (hx, -hy, 1.5 * math.pi)]
    for k, (cx, cy, a0) in enumerate(corners):
        pts.append(np.array([cx, cy]) + _arc(corner, a0, a0 + math.pi / 2, 6))
        nx_, ny_ = corners[(k + 1) % 4][:2]
        sx, sy = cx + corner * math.cos(a0 + math.pi / 2), cy + corner * math.sin(a0 + math.pi / 2)
        ex = nx_ + corner * math.cos(a0 + math.pi / 2)
        ey = ny_ + corner * math.sin(a0 + math.pi / 2)
        n = max(2, int(math.hypot(ex - sx, ey - sy) / spacing))
        t = np.linspace(0, 1, n, endpoint=False)
        pts.append(np.column_stack([sx + t * (ex - sx), sy + t * (ey - sy)]))
    return np.vstack(pts)


def cluttered_rectangleish(lambda_base: float = 1.0) -> DomainSpec:
    """Rounded 4 x 2 rectangle (corner radius 0.2) holding several obstacles."""
    boundary = Spline(rounded_rectangle_points())
    lb = lambda_base
    barriers = (
        Barrier(Circle((-1.2, 0.3), 0.35), lb, lb),
        Barrier(Ellipse((0.2, -0.2), 0.6, 0.25, 0.5), lb / 2, lb),
        Barrier(Circle((1.3, 0.4), 0.3), lb, lb / 2),
        Barrier(Ellipse((1.2, -0.55), 0.35, 0.15, -0.3), lb, lb),
    )
    return DomainSpec(boundary, barriers)


def squiggle(amplitude: float = 0.08, lobes: int = 12, n_points: int = 768) -> DomainSpec:
    """Barrier-free domain whose outer curve wiggles: ``r = 1 + a sin(k theta)``."""
    t = np.linspace(0, 2 * math.pi, n_points, endpoint=False)
    r = 1 + amplitude * np.sin(lobes * t)
    return DomainSpec(Spline(np.column_stack([r * np.cos(t), r * np.sin(t)])))


def near_parallel(gap: float = 0.05, lam: float = 1.0) -> DomainSpec:
    """Unit disk holding two flat ellipses whose long sides face each other ``gap`` apart."""
    b = 0.2
    off = b + gap / 2
    return DomainSpec(Circle((0.0, 0.0), 1.0),
                      (Barrier(Ellipse((0.0, off), 0.6, b, 0.0), lam, lam),
                       Barrier(Ellipse((0.0, -off), 0.6, b, 0.0), lam, lam)))


SCENARIOS = {
    "disk_plain": disk_plain,
    "disk_one_barrier": disk_one_barrier,
    "nested_circles": nested_circles,
    "nonconvex_spline": nonconvex_spline,
    "cluttered_rectangleish": cluttered_rectangleish,
}


@dataclass
class ScenarioParams:
    name: str
    params: dict = field(default_factory=dict)

    def build(self) -> DomainSpec:
        try:
            factory = SCENARIOS[self.name]
        except KeyError:
            raise ValueError(f"unknown scenario {self.name!r}; choose from "
                             f"{sorted(SCENARIOS)}") from None
        return factory(**self.params)


@dataclass
class Fixture:
    """A named domain with the ranges its geometric parameters must fall in."""

    name: str
    domain: DomainSpec
    expected: dict


def fixtures() -> list:
    """Standard domains used across the tests, with expected parameter ranges.

    Ranges come from closed forms where those exist (disks, gaps between flat
    sides, the crescent's inner-wall geodesic) and otherwise from the
    numerical oracles, with a few percent of slack.
    """
    pi = math.pi
    return [
        Fixture("disk_plain", disk_plain(),
                {"kappa": (1.0, 1.0), "delta": (1.96, 2.04), "area": (pi - 1e-6, pi + 1e-6)}),
        Fixture("disk_one_barrier", disk_one_barrier(0.5, 1.0, 1.0),
                {"kappa": (2.0, 2.0), "rho": (0.245, 0.255), "delta": (1.96, 2.04)}),
        Fixture("nested_circles_1", nested_circles(1),
                {"kappa": (1.0, 1.0), "rho": (0.49, 0.51), "delta": (5.88, 6.12)}),
        Fixture("squiggle", squiggle(), {"kappa": (12.2, 12.9)}),
        Fixture("near_parallel", near_parallel(0.05),
                {"rho": (0.0245, 0.0255), "kappa": (0.6 / 0.04 * 0.97, 0.6 / 0.04 * 1.03)}),
        Fixture("nonconvex_spline", nonconvex_spline(),
                {"kappa": (10.0, 10.0), "rho": (0.0735, 0.0765), "delta": (3.03, 3.22)}),
        Fixture("cluttered_rectangleish", cluttered_rectangleish(),
                {"kappa": (4.0, 20.0), "area": (8.0 - (4 - pi) * 0.04 - 0.01,
                                                8.0 - (4 - pi) * 0.04 + 0.01)}),
    ]
