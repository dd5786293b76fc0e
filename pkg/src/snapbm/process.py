"""Snapping-out Brownian motion: single-particle stepping and ensembles.

Between contacts the particle moves as planar Brownian motion discretised by
Euler steps. When a step crosses the outer curve, or a barrier that its
current sign forbids crossing, the overshoot is reflected across the tangent
line at the hit point and the reflection push ``2|r . n|`` is added to that
barrier's local time. Each barrier carries an exponential budget of local
time; when a reflection would exhaust it, the sign flips, a fresh budget is
drawn at the rate of the new state, and the remainder of the step continues
through the barrier.

Randomness is counter based: particle ``k`` of a run with seed ``s`` reads the
stream keyed ``(s, k)`` (offset by a run tag), so results do not depend on
how particles are scheduled over threads.
"""

from __future__ import annotations

import csv
import math
import warnings
import weakref
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as kern
from .errors import ConfigError, InconsistentSigns, PointOutsideDomain, StuckParticle
from .geometry import DomainSpec

STREAM_TAG_SHIFT = 32

_compiled = weakref.WeakKeyDictionary()


def _kernel_data(domain: DomainSpec):
    """Compiled geometry and padded rate arrays for ``domain`` (cached)."""
    try:
        return _compiled[domain]
    except KeyError:
        pass
    geo = kern.compile_domain(domain)
    lam_p = np.ones(domain.m + 1)
    lam_m = np.ones(domain.m + 1)
    for k, b in enumerate(domain.barriers, start=1):
        lam_p[k] = b.lambda_plus
        lam_m[k] = b.lambda_minus
    data = (geo, lam_p, lam_m)
    _compiled[domain] = data
    return data


@dataclass(frozen=True)
class SimConfig:
    """Numerical settings shared by every simulation entry point.

    ``tau_band`` only widens what counts as "touching" a barrier in
    diagnostics; contacts in the dynamics are detected by crossing.
    """

    dt: float = 1e-3
    bridge_correction: bool = False
    tau_band: float = 0.0
    seed: int = 0
    particles: int = 1
    t_final: float = 1.0

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.tau_band < 0:
            raise ConfigError("tau_band must be nonnegative")
        if self.particles < 1:
            raise ConfigError("particles must be at least 1")
        if self.t_final < 0:
            raise ConfigError("t_final must be nonnegative")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def check_step(self, domain: DomainSpec) -> bool:
        """Warn when dt is coarse relative to the curvature and separation scales."""
        from .geometry import max_curvature, separation_rho

        r_geom = min(1.0 / max_curvature(domain), separation_rho(domain))
        ok = self.dt <= r_geom**2 / 25
        if not ok:
            warnings.warn(f"dt={self.dt:g} exceeds {r_geom**2 / 25:.3g}; "
                          "reflections may be inaccurate", RuntimeWarning, stacklevel=2)
        return ok


@dataclass
class ParticleState:
    """A particle together with its per-barrier chains and RNG position.

    Arrays have one entry per barrier, in the order of ``domain.barriers``.
    """

    position: np.ndarray
    signs: np.ndarray
    local_times: np.ndarray
    budgets: np.ndarray
    clock: float = 0.0
    flips: np.ndarray = None
    seed: int = 0
    stream: int = 0
    counter: int = 0

    def __post_init__(self):
        self.position = np.asarray(self.position, float).copy()
        self.signs = np.asarray(self.signs, np.int64).copy()
        self.local_times = np.asarray(self.local_times, float).copy()
        self.budgets = np.asarray(self.budgets, float).copy()
        if self.flips is None:
            self.flips = np.zeros(len(self.signs), np.int64)
        else:
            self.flips = np.asarray(self.flips, np.int64).copy()

    def copy(self) -> "ParticleState":
        return replace(self)


def _padded(values, first, dtype):
    out = np.empty(len(values) + 1, dtype)
    out[0] = first
    out[1:] = values
    return out


def _check_signs(domain: DomainSpec, x0, s0):
    x0 = np.asarray(x0, float)
    if not domain.contains(x0[None])[0]:
        raise PointOutsideDomain(f"start point {tuple(x0)} is outside the domain")
    forced = domain.sides(x0[None])[0] if domain.m else np.zeros(0, np.int64)
    if s0 is None or (isinstance(s0, str) and s0 == "consistent-default"):
        return forced.astype(np.int64)
    s0 = np.asarray(s0, np.int64)
    if s0.shape != (domain.m,) or not np.all(np.abs(s0) == 1):
        raise InconsistentSigns(f"expected {domain.m} signs of +1 or -1, got {s0.tolist()}")
    for i, b in enumerate(domain.barriers):
        if s0[i] != forced[i] and b.curve.distance(x0[None])[0] > domain.tau:
            raise InconsistentSigns(
                f"barrier {i}: start point is on side {forced[i]:+d} but sign {s0[i]:+d} was given")
    return s0


def init_state(domain: DomainSpec, x0, s0=None, seed: int = 0, stream: int = 0) -> ParticleState:
    """A particle at ``x0`` with signs checked against its position.

    Off every barrier the signs are forced by the position. A start on a
    barrier may take either sign, which is then decided by ``s0``. Budgets are
    drawn from the particle's own stream.
    """
    signs = _check_signs(domain, x0, s0)
    _, lam_p, lam_m = _kernel_data(domain)
    sign_p = _padded(signs, 1, np.int64)
    budgets = np.zeros(domain.m + 1)
    counter = kern.init_budgets(sign_p, budgets, lam_p, lam_m, np.uint64(seed),
                                np.uint64(stream), 0)
    m = domain.m
    return ParticleState(position=x0, signs=signs, local_times=np.zeros(m),
                         budgets=budgets[1:], seed=seed, stream=stream, counter=int(counter))


def step(state: ParticleState, domain: DomainSpec, cfg: SimConfig) -> ParticleState:
    """One Euler step; returns a new state and leaves ``state`` untouched."""
    geo, lam_p, lam_m = _kernel_data(domain)
    pos = state.position.copy()
    sign = _padded(state.signs, 1, np.int64)
    lt = _padded(state.local_times, 0.0, float)
    bud = _padded(state.budgets, 0.0, float)
    fl = _padded(state.flips, 0, np.int64)
    counter, status = kern.step_one(geo, lam_p, lam_m, pos, sign, lt, bud, fl, cfg.dt,
                                    cfg.bridge_correction, np.uint64(state.seed),
                                    np.uint64(state.stream), state.counter)
    if status != kern.OK:
        raise StuckParticle(f"more than {kern.MAX_REFLECTIONS} reflections in one step; "
                            "reduce dt")
    return ParticleState(position=pos, signs=sign[1:], local_times=lt[1:], budgets=bud[1:],
                         clock=state.clock + cfg.dt, flips=fl[1:], seed=state.seed,
                         stream=state.stream, counter=int(counter))


@dataclass
class Trajectory:
    """Snapshots of one particle: ``signs`` and ``local_times`` are (T, m)."""

    times: np.ndarray
    positions: np.ndarray
    signs: np.ndarray
    local_times: np.ndarray

    def to_csv(self, path):
        write_trajectory_csv(path, self)


@dataclass
class Ensemble:
    """Final states of a batch of particles plus optional snapshots.

    ``snapshots`` holds positions with shape (N, S, 2); ``snapshot_signs`` and
    ``snapshot_local_times`` are (N, S, m). ``exit_times`` is set when a run
    stops particles on leaving a ball and is NaN for those that never left.
    """

    positions: np.ndarray
    signs: np.ndarray
    local_times: np.ndarray
    budgets: np.ndarray
    flips: np.ndarray
    clock: float
    seed: int
    stream_tag: int
    snapshot_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    snapshots: np.ndarray = None
    snapshot_signs: np.ndarray = None
    snapshot_local_times: np.ndarray = None
    exit_times: np.ndarray = None

    def __len__(self):
        return len(self.positions)

    def trajectory(self, k: int) -> Trajectory:
        return Trajectory(self.snapshot_times.copy(), self.snapshots[k].copy(),
                          self.snapshot_signs[k].copy(), self.snapshot_local_times[k].copy())

    def state(self, k: int) -> ParticleState:
        return ParticleState(self.positions[k], self.signs[k], self.local_times[k],
                             self.budgets[k], clock=self.clock, flips=self.flips[k],
                             seed=self.seed)


def particle_streams(n: int, stream_tag: int = 0) -> np.ndarray:
    return (np.uint64(stream_tag) << np.uint64(STREAM_TAG_SHIFT)) + np.arange(n, dtype=np.uint64)


def _snap_steps(snapshot_times, dt, n_steps):
    t = np.asarray(snapshot_times, float).ravel()
    if np.any(np.diff(t) < 0):
        raise ConfigError("snapshot times must be sorted")
    steps = np.rint(t / dt).astype(np.int64)
    if len(steps) and (steps[0] < 0 or steps[-1] > n_steps):
        raise ConfigError("snapshot times must lie in [0, t_final]")
    return steps


def simulate_paths(domain: DomainSpec, cfg: SimConfig, x0=None, s0=None, *,
                   snapshot_times=None, stream_tag: int = 0, exit_ball=None) -> Ensemble:
    """Run ``cfg.particles`` independent particles to ``cfg.t_final``.

    ``x0`` is a single start point or an (N, 2) array of starts; ``s0``
    follows :func:`init_state` and, for an array of starts, applies only to
    starts on a barrier (others are forced by their positions). With
    ``exit_ball=(center, radius)`` each particle stops at its first step
    outside the ball and ``exit_times`` records when.
    """
    geo, lam_p, lam_m = _kernel_data(domain)
    n = cfg.particles
    m = domain.m
    if x0 is None:
        raise ConfigError("a start point or an array of start points is required")
    x0 = np.asarray(x0, float)
    if x0.ndim == 1:
        signs0 = np.tile(_check_signs(domain, x0, s0), (n, 1))
        pos = np.tile(x0, (n, 1))
    else:
        if len(x0) != n:
            raise ConfigError(f"{len(x0)} start points for {n} particles")
        if not domain.contains(x0).all():
            raise PointOutsideDomain("some start points lie outside the domain")
        pos = x0.copy()
        signs0 = domain.sides(x0).astype(np.int64) if m else np.zeros((n, 0), np.int64)
        if s0 is not None and m:
            s0 = np.broadcast_to(np.asarray(s0, np.int64), (n, m))
            for i, b in enumerate(domain.barriers):
                on = b.curve.distance(x0) <= domain.tau
                signs0[on, i] = s0[on, i]
    sign = np.ones((n, m + 1), np.int64)
    sign[:, 1:] = signs0
    lt = np.zeros((n, m + 1))
    bud = np.zeros((n, m + 1))
    flips = np.zeros((n, m + 1), np.int64)
    streams = particle_streams(n, stream_tag)
    seed = np.uint64(cfg.seed)
    counter = np.zeros(n, np.int64)
    for i in range(n):
        counter[i] = kern.init_budgets(sign[i], bud[i], lam_p, lam_m, seed, streams[i], 0)
    n_steps = cfg.n_steps
    snaps = _snap_steps([] if snapshot_times is None else snapshot_times, cfg.dt, n_steps)
    S = len(snaps)
    snap_pos = np.zeros((n, S, 2))
    snap_sign = np.zeros((n, S, m + 1), np.int64)
    snap_lt = np.zeros((n, S, m + 1))
    hit = np.full(n, -1, np.int64)
    status = np.zeros(n, np.int64)
    if exit_ball is None:
        center, radius = np.zeros(2), 0.0
    else:
        center, radius = np.asarray(exit_ball[0], float), float(exit_ball[1])
    kern.run_ensemble(geo, lam_p, lam_m, pos, sign, lt, bud, flips, counter, streams, seed,
                      cfg.dt, n_steps, cfg.bridge_correction, snaps, snap_pos, snap_sign,
                      snap_lt, center, radius, hit, status)
    stuck = np.flatnonzero(status != kern.OK)
    if len(stuck):
        k = int(stuck[0])
        raise StuckParticle(f"particle {k} needed more than {kern.MAX_REFLECTIONS} "
                            f"reflections in one step near t={hit[k] * cfg.dt:g}; reduce dt",
                            particle=k)
    exit_times = None
    if exit_ball is not None:
        exit_times = np.where(hit >= 0, hit * cfg.dt, np.nan)
    return Ensemble(positions=pos, signs=sign[:, 1:], local_times=lt[:, 1:],
                    budgets=bud[:, 1:], flips=flips[:, 1:], clock=n_steps * cfg.dt,
                    seed=int(cfg.seed), stream_tag=stream_tag,
                    snapshot_times=snaps * cfg.dt, snapshots=snap_pos,
                    snapshot_signs=snap_sign[:, :, 1:], snapshot_local_times=snap_lt[:, :, 1:],
                    exit_times=exit_times)


def crossing_count(trajectory, barrier_index: int) -> int:
    """Number of sign changes of one barrier's chain along a trajectory.

    Accepts a :class:`Trajectory`, a (T, m) array of recorded signs, or a
    :class:`ParticleState`/single-particle record with a ``flips`` counter.
    """
    if isinstance(trajectory, ParticleState):
        return int(trajectory.flips[barrier_index])
    signs = trajectory.signs if isinstance(trajectory, Trajectory) else np.asarray(trajectory)
    col = np.asarray(signs)[:, barrier_index]
    return int(np.count_nonzero(col[1:] != col[:-1]))


def write_trajectory_csv(path, trajectory: Trajectory):
    m = trajectory.signs.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y"] + [f"s_{i + 1}" for i in range(m)]
                   + [f"L_{i + 1}" for i in range(m)])
        for k, t in enumerate(trajectory.times):
            x, y = trajectory.positions[k]
            w.writerow([repr(float(t)), repr(float(x)), repr(float(y))]
                       + [int(s) for s in trajectory.signs[k]]
                       + [repr(float(v)) for v in trajectory.local_times[k]])
