"""Monte Carlo checks of scaling laws used in the mixing argument.

* Tube event: a free Brownian path from the origin ends in ``B(y, eps)`` at
  time ``R**2`` while staying within ``gamma * R`` of the straight line to
  ``y``. Its probability scales like ``(eps / R)**2``.
* Crossing: the chance of ending in a small ball on the far side of a
  barrier is linear in the permeability when that is small.
* Reflected Brownian motion without permeable barriers keeps the uniform law.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import ncx2, norm

from . import _kernels as kern
from ._rng import stream_generator
from .errors import ConstraintViolation
from .estimators import histogram, histogram_grid, tv_distance
from .geometry import DomainSpec, sample_uniform
from .process import SimConfig, simulate_paths

TAG_PILL = 3 << 10
TAG_CROSSING = 4 << 10
TAG_UNIFORM = 5 << 10
IMPERMEABLE = 1e-9


@dataclass
class ProbEstimate:
    """A Monte Carlo probability with a 95% interval; ``hits`` of ``n`` samples succeeded."""

    estimate: float
    ci_low: float
    ci_high: float
    hits: int
    n: int

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> ProbEstimate:
    z = norm.ppf(0.5 + confidence / 2)
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    low = 0.0 if k == 0 else max(0.0, mid - half)
    high = 1.0 if k == n else min(1.0, mid + half)
    return ProbEstimate(p, low, high, int(k), int(n))


def _check_pill(R, y, eps, gamma):
    if not R > 0:
        raise ConstraintViolation("R must be positive")
    if not 0 < gamma < 1:
        raise ConstraintViolation("gamma must lie in (0, 1)")
    if not 0 < eps <= gamma * R / 2:
        raise ConstraintViolation("eps must lie in (0, gamma * R / 2]")
    if math.hypot(*y) > R * (1 + 1e-12):
        raise ConstraintViolation("the target centre must satisfy |y| <= R")


def endpoint_in_ball(R: float, y, eps: float) -> float:
    """Exact probability that a planar Gaussian ``N(0, R^2 I)`` lands in ``B(y, eps)``."""
    return float(ncx2.cdf((eps / R) ** 2, 2, (np.hypot(*y) / R) ** 2))


def pill_event_probability(R: float, y, eps: float, gamma: float, N: int, seed: int = 0, *,
                           n_steps: int = 2048, stream: int = 0) -> ProbEstimate:
    """Probability of the tube event for Brownian paths observed on ``n_steps`` time steps.

    The event factorises into the endpoint landing in ``B(y, eps)``, whose
    probability is computed exactly, and the path staying in the tube given
    that endpoint, which is estimated from ``N`` conditioned paths (discrete
    Brownian bridges with the same law at the grid times as the plain
    random walk). Without the factorisation the event is too rare for plain
    sampling at small ``gamma``. The interval scales the Wilson interval of
    the conditional part.
    """
    y = np.asarray(y, float)
    _check_pill(R, y, eps, gamma)
    p_end = endpoint_in_ball(R, y, eps)
    base = np.uint64(((TAG_PILL + stream) << 32) & (2**64 - 1))
    hits = kern.pill_bridge_hits(np.uint64(seed), base, int(N), float(R), float(y[0]),
                                 float(y[1]), float(eps), float(gamma), int(n_steps))
    cond = wilson_interval(int(hits.sum()), N)
    return ProbEstimate(p_end * cond.estimate, p_end * cond.ci_low, p_end * cond.ci_high,
                        cond.hits, N)


def pill_event_euler(R: float, y, eps: float, gamma: float, N: int, seed: int = 0, *,
                     n_steps: int = 2048, batch: int = 4096, stream: int = 0) -> ProbEstimate:
    """The same event with every path simulated step by step (slow reference)."""
    y = np.asarray(y, float)
    _check_pill(R, y, eps, gamma)
    rng = stream_generator(seed, (TAG_PILL << 32) + (1 << 31) + stream)
    sd = R / math.sqrt(n_steps)
    hits = 0
    done = 0
    while done < N:
        m = min(batch, N - done)
        done += m
        pos = np.zeros((m, 2))
        alive = np.ones(m, bool)
        for s in range(1, n_steps + 1):
            pos += rng.normal(scale=sd, size=(m, 2))
            dev = pos - (s / n_steps) * y
            alive &= np.hypot(dev[:, 0], dev[:, 1]) <= gamma * R
        alive &= np.hypot(*(pos - y).T) <= eps
        hits += int(alive.sum())
    return wilson_interval(hits, N)


@dataclass
class CrossingTable:
    lambdas: np.ndarray
    estimates: list
    slope: float
    ratios: np.ndarray
    params: dict = field(default_factory=dict)

    def rows(self):
        return [(float(lam), e.estimate, e.ci_low, e.ci_high)
                for lam, e in zip(self.lambdas, self.estimates)]


def crossing_probability_scaling(domain: DomainSpec, lambdas: Sequence[float], N: int,
                                 seed: int = 0, *, start=(0.3, 0.0), target=(0.7, 0.0),
                                 target_radius: float = 0.1, T: float = 0.25,
                                 dt: float = 2e-3) -> CrossingTable:
    """Probability of ending in a small target ball at time ``T`` for each symmetric rate.

    ``slope`` is the least-squares slope of log-probability against
    log-rate (1 for a linear law); ``ratios[k]`` is ``P(lambdas[k]) /
    P(lambdas[k + 1])``. Every rate reuses the same random streams, which
    makes the ratios far less noisy than independent runs would.
    """
    lambdas = np.asarray(lambdas, float)
    out = []
    for lam in lambdas:
        dom = domain.with_rates(lam, lam)
        cfg = SimConfig(dt=dt, seed=seed, particles=N, t_final=T)
        ens = simulate_paths(dom, cfg, np.asarray(start, float), stream_tag=TAG_CROSSING)
        inside = np.hypot(*(ens.positions - np.asarray(target)).T) <= target_radius
        out.append(wilson_interval(int(inside.sum()), N))
    p = np.array([e.estimate for e in out])
    pos = p > 0
    slope = float(np.polyfit(np.log(lambdas[pos]), np.log(p[pos]), 1)[0]) \
        if pos.sum() >= 2 else math.nan
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = p[:-1] / p[1:]
    return CrossingTable(lambdas, out, slope, ratios,
                         {"start": list(start), "target": list(target),
                          "target_radius": target_radius, "T": T, "dt": dt, "N": N})


def time_reversal_uniformity(domain: DomainSpec, T: float, N: int, seed: int = 0, *,
                             region: Optional[Sequence[int]] = None, dt: float = 1e-3,
                             h: Optional[float] = None) -> float:
    """Total variation to uniform at time ``T`` for particles started uniformly.

    Every barrier is made practically impermeable, so each region between
    barriers is a classical reflecting domain. ``region`` (a sign per
    barrier) restricts starts and the reference law to one such region.
    """
    dom = domain.with_rates(IMPERMEABLE, IMPERMEABLE) if domain.m else domain
    from .estimators import default_pitch

    h = default_pitch(dom) if h is None else h
    grid = histogram_grid(dom, float(h), None if region is None else tuple(int(s) for s in region))
    rng = stream_generator(seed, TAG_UNIFORM << 32)
    x0 = sample_uniform(dom, N, rng, region=region)
    cfg = SimConfig(dt=dt, seed=seed, particles=N, t_final=T)
    ens = simulate_paths(dom, cfg, x0, stream_tag=TAG_UNIFORM)
    return tv_distance(histogram(ens, dom, grid=grid), grid.uniform())


@dataclass
class CheckResult:
    name: str
    params: dict
    estimate: float
    ci_low: float
    ci_high: float
    passed: bool


def write_proofcheck_csv(path, results: Sequence[CheckResult]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check_name", "params", "estimate", "ci_low", "ci_high", "pass"])
        for r in results:
            w.writerow([r.name, json.dumps(r.params, sort_keys=True), repr(float(r.estimate)),
                        repr(float(r.ci_low)), repr(float(r.ci_high)), str(bool(r.passed)).lower()])


def run_all(seed: int = 0, N: int = 200_000) -> list:
    """A quick pass over every check at sample size ``N``, as used by the command line."""
    from .scenarios import disk_one_barrier, disk_plain

    res = []
    a = pill_event_probability(1.0, (0.0, 0.0), 0.1, 0.5, N, seed)
    b = pill_event_probability(1.0, (0.0, 0.0), 0.05, 0.5, N, seed)
    ratio = a.estimate / b.estimate if b.estimate > 0 else math.inf
    rel = math.sqrt(1 / max(a.hits, 1) + 1 / max(b.hits, 1))
    res.append(CheckResult("pill_eps_scaling", {"R": 1.0, "gamma": 0.5, "eps": [0.1, 0.05],
                                                "N": N},
                           ratio, ratio * (1 - 2 * rel), ratio * (1 + 2 * rel),
                           3.2 <= ratio <= 4.8))
    s1 = pill_event_probability(1.0, (0.5, 0.0), 0.1, 0.5, N, seed, stream=1)
    s2 = pill_event_probability(2.0, (1.0, 0.0), 0.2, 0.5, N, seed, stream=2)
    diff = s1.estimate - s2.estimate
    tol = 3 * math.hypot(s1.half_width, s2.half_width)
    res.append(CheckResult("pill_scale_invariance", {"R": [1.0, 2.0], "N": N}, diff,
                           diff - tol, diff + tol, abs(diff) <= tol))
    lam0 = 0.5
    tab = crossing_probability_scaling(disk_one_barrier(0.5, 1.0, 1.0),
                                       [lam0, lam0 / 2, lam0 / 4, lam0 / 8], N, seed)
    for k, r in enumerate(tab.ratios):
        res.append(CheckResult("crossing_halving_ratio",
                               {"lambda": float(tab.lambdas[k]), **tab.params}, float(r),
                               math.nan, math.nan, bool(1.6 <= r <= 2.4)))
    tv = time_reversal_uniformity(disk_plain(), 8.0, N, seed)
    res.append(CheckResult("uniform_stationarity", {"T": 8.0, "N": N}, tv, 0.0, tv, tv <= 0.05))
    return res
