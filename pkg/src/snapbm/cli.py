"""Command line entry point.

Every command reads a domain from ``--config`` (JSON) or ``--scenario``,
writes its artifacts under ``--out`` and prints the main JSON result. Exit
status is 0 on success, 2 when a diagnostic failed (the results are still
written) and 1 on errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, HorizonTooShort, NotConverged, SmallSample, SnapBMError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DIAGNOSTIC = 2


def _default_seed():
    raw = os.environ.get("SNAPBM_SEED")
    if raw is None:
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigError(f"SNAPBM_SEED={raw!r} is not an integer") from None


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _threads(text):
    if text == "auto":
        return text
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("threads must be positive or 'auto'")
    return value


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--config", type=Path, help="domain JSON file")
    g.add_argument("--scenario", help="built-in scenario name instead of --config")
    g.add_argument("--seed", type=_seed, default=None,
                   help="64-bit seed (default: $SNAPBM_SEED or 0)")
    g.add_argument("--particles", type=int, default=1000)
    g.add_argument("--dt", type=float, default=1e-3)
    g.add_argument("--t-final", type=float, default=4.0)
    g.add_argument("--grid-pitch", type=float, default=None,
                   help="histogram cell size (default: geodesic diameter / 16)")
    g.add_argument("--out", type=Path, default=Path("."))
    g.add_argument("--threads", type=_threads, default="auto")
    g.add_argument("--svg", action="store_true", help="also write a density heat map")
    g.add_argument("--c", type=float, default=1.0, help="scale constant in R")
    s = p.add_argument_group("scenario parameters (with --scenario or the scenario command)")
    s.add_argument("--n", type=int, default=1, help="nested_circles: number of pairs")
    s.add_argument("--mode", choices=("metastable", "outward"), default="metastable")
    s.add_argument("--bias", type=float, default=4.0)
    s.add_argument("--lambda-base", type=float, default=1.0)
    s.add_argument("--rb", type=float, default=0.5, help="disk_one_barrier: barrier radius")
    s.add_argument("--lp", type=float, default=1.0)
    s.add_argument("--lm", type=float, default=1.0)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="snapbm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("geometry", parents=[common], help="geometric parameters of a domain")

    p = sub.add_parser("simulate", parents=[common], help="run an ensemble")
    p.add_argument("--x0", type=float, nargs=2, default=None,
                   help="start point (default: deepest point of the first region)")
    p.add_argument("--s0", type=int, nargs="*", default=None, help="signs for an on-barrier start")
    p.add_argument("--snapshots", type=int, default=0,
                   help="record this many equally spaced snapshots")
    p.add_argument("--trajectory", type=int, default=None,
                   help="write the snapshots of this particle to trajectory.csv")

    p = sub.add_parser("stationary", parents=[common], help="estimate the stationary law")
    p.add_argument("--burn-in", type=float, default=None)

    p = sub.add_parser("mixing", parents=[common], help="estimate the mixing time")
    p.add_argument("--burn-in", type=float, default=None)
    p.add_argument("--snapshots", type=int, default=40)
    p.add_argument("--threshold", type=float, default=0.25)
    p.add_argument("--start-pitch", type=float, default=None)

    p = sub.add_parser("doeblin", parents=[common], help="empirical minorization constant")
    p.add_argument("--T", type=float, default=None, help="time horizon (default --t-final)")
    p.add_argument("--start-pitch", type=float, default=None)

    p = sub.add_parser("bounds", parents=[common], help="evaluate the closed-form bounds")
    p.add_argument("--empirical-tmix", type=float, default=None)
    p.add_argument("--empirical-pimin", type=float, default=None)

    sub.add_parser("proofcheck", parents=[common], help="run the scaling checks")

    p = sub.add_parser("scenario", parents=[common], help="write a scenario as domain JSON")
    p.add_argument("name")
    p.add_argument("--emit", type=Path, required=True)
    return parser


def _scenario_domain(name, args):
    from . import scenarios

    params = {
        "nested_circles": dict(n=args.n, lambda_base=args.lambda_base, bias=args.bias,
                               mode=args.mode),
        "disk_one_barrier": dict(Rb=args.rb, lp=args.lp, lm=args.lm),
    }.get(name, {})
    return scenarios.ScenarioParams(name, params).build()


def _load_domain(args):
    from .geometry import DomainSpec

    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None
        return DomainSpec.from_json(text)
    if args.scenario is not None:
        try:
            return _scenario_domain(args.scenario, args)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    raise ConfigError("give a domain with --config PATH or --scenario NAME")


def config_hash(domain) -> str:
    # proofcheck runs on built-in domains and may be given none.
    data = domain.to_dict() if domain is not None else {"builtin": "proofcheck"}
    text = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _set_threads(spec):
    import numba

    limit = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(limit if spec == "auto" else min(int(spec), limit))


class _Run:
    """Shared state of one command invocation."""

    def __init__(self, args):
        from .process import SimConfig

        self.args = args
        self.seed = args.seed if args.seed is not None else _default_seed()
        needs_domain = args.command != "proofcheck" or args.config or args.scenario
        self.domain = _load_domain(args) if needs_domain else None
        self.cfg = SimConfig(dt=args.dt, seed=self.seed, particles=args.particles,
                             t_final=args.t_final)
        self.out = args.out
        self.out.mkdir(parents=True, exist_ok=True)
        self.status = EXIT_OK

    def meta(self) -> dict:
        return {"config_hash": config_hash(self.domain), "seed": self.seed,
                "dt": self.cfg.dt, "particles": self.cfg.particles, "version": __version__}

    def emit(self, name: str, payload: dict):
        from .estimators import write_summary_json

        data = {**payload, "meta": self.meta()}
        write_summary_json(self.out / name, data)
        print((self.out / name).read_text(), end="")


def _geometry(run):
    from .geometry import geometry_report

    rep = geometry_report(run.domain, c=run.args.c)
    run.emit("geometry.json", {"geometry": rep.to_dict()})


def _simulate(run):
    from .estimators import deepest_points, write_summary_json
    from .process import simulate_paths

    a = run.args
    x0 = np.asarray(a.x0) if a.x0 is not None else deepest_points(run.domain)[0]
    times = None
    if a.snapshots or a.trajectory is not None:
        times = np.linspace(0.0, run.cfg.t_final, max(a.snapshots, 2))
    ens = simulate_paths(run.domain, run.cfg, x0, a.s0, snapshot_times=times)
    m = run.domain.m
    cols = ["x", "y"] + [f"s_{i + 1}" for i in range(m)] + [f"L_{i + 1}" for i in range(m)]
    table = np.column_stack([ens.positions, ens.signs, ens.local_times])
    np.savetxt(run.out / "final_states.csv", table, delimiter=",", header=",".join(cols),
               comments="", fmt="%.17g")
    if a.trajectory is not None:
        ens.trajectory(a.trajectory).to_csv(run.out / "trajectory.csv")
    run.emit("summary.json", {
        "simulate": {"x0": x0, "t_final": ens.clock,
                     "mean_local_time": ens.local_times.mean(axis=0) if m else [],
                     "mean_crossings": ens.flips.mean(axis=0) if m else [],
                     "mean_position": ens.positions.mean(axis=0)}})


def _stationary_hist(run, burn_in):
    from .estimators import stationary_estimate

    burn = run.cfg.t_final / 2 if burn_in is None else burn_in
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConverged)
        pi = stationary_estimate(run.domain, run.cfg, burn, h=run.args.grid_pitch)
    if not pi.diagnostics["converged"]:
        run.status = EXIT_DIAGNOSTIC
    return pi


def _write_pi(run, pi):
    from .estimators import histogram_svg, pi_min_estimate, write_pi_hat_csv

    write_pi_hat_csv(run.out / "pi_hat.csv", pi)
    if run.args.svg:
        histogram_svg(pi, run.out / "pi_hat.svg")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmallSample)
        pm = pi_min_estimate(pi)
    return pm


def _stationary(run):
    pi = _stationary_hist(run, run.args.burn_in)
    pm = _write_pi(run, pi)
    run.emit("summary.json", {"pi_min_hat": pm.value, "pi_min_cell": pm.cell_center,
                              "pi_min_small_sample": pm.small_sample,
                              "diagnostics": pi.diagnostics})


def _mixing(run):
    from .estimators import default_start_mesh, mixing_time_estimate, write_tv_curve_csv

    a = run.args
    pi = _stationary_hist(run, a.burn_in)
    pm = _write_pi(run, pi)
    times = np.linspace(0.0, run.cfg.t_final, a.snapshots + 1)[1:]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HorizonTooShort)
        est = mixing_time_estimate(run.domain, run.cfg, default_start_mesh(run.domain, a.start_pitch),
                                   times, pi_hat=pi, threshold=a.threshold)
    write_tv_curve_csv(run.out / "tv_curve.csv", est)
    if est.unbounded:
        run.status = EXIT_DIAGNOSTIC
    run.emit("summary.json", {
        "t_mix_hat": "UNBOUNDED" if est.unbounded else est.t_mix_hat,
        "pi_min_hat": pm.value, "doeblin_C": None,
        "diagnostics": {**pi.diagnostics, "threshold": est.threshold,
                        "n_starts": len(est.start_mesh),
                        "final_worst_tv": float(est.worst()[-1]),
                        "horizon_too_short": est.unbounded}})


def _doeblin(run):
    from .bounds import doeblin_to_tmix
    from .errors import InvalidMinorization
    from .estimators import default_start_mesh, doeblin_constant
    from .geometry import area

    a = run.args
    T = run.cfg.t_final if a.T is None else a.T
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmallSample)
        est = doeblin_constant(run.domain, run.cfg, T,
                               default_start_mesh(run.domain, a.start_pitch), a.grid_pitch)
    A = area(run.domain)
    try:
        bound = doeblin_to_tmix(est.C, T, A)
    except InvalidMinorization:
        bound = None
        run.status = EXIT_DIAGNOSTIC
    run.emit("summary.json", {"doeblin_C": est.C, "doeblin_C_point": est.C_point, "T": T,
                              "C_times_area": est.C * A, "tmix_from_doeblin": bound,
                              "worst_start": est.worst_start, "worst_cell": est.worst_cell,
                              "diagnostics": {"small_sample": est.small_sample}})


def _bounds(run):
    from .bounds import theorem_bounds
    from .geometry import geometry_report

    a = run.args
    rep = geometry_report(run.domain, c=a.c)
    b = theorem_bounds(rep, a.empirical_tmix, a.empirical_pimin)
    if b.consistency_flags.get("evaluated") and not b.consistency_flags["all_pass"]:
        run.status = EXIT_DIAGNOSTIC
    run.emit("bounds.json", {"bounds": b.to_dict(), "geometry": rep.to_dict()})


def _proofcheck(run):
    from .proofcheck import run_all, write_proofcheck_csv

    results = run_all(run.seed, run.cfg.particles)
    write_proofcheck_csv(run.out / "proofcheck.csv", results)
    if not all(r.passed for r in results):
        run.status = EXIT_DIAGNOSTIC
    run.emit("summary.json", {"proofcheck": [
        {"check": r.name, "estimate": r.estimate, "pass": r.passed} for r in results]})


def _scenario(args):
    dom = _scenario_domain(args.name, args)
    args.emit.parent.mkdir(parents=True, exist_ok=True)
    dom.dump(args.emit)
    print(str(args.emit))
    return EXIT_OK


COMMANDS = {"geometry": _geometry, "simulate": _simulate, "stationary": _stationary,
            "mixing": _mixing, "doeblin": _doeblin, "bounds": _bounds,
            "proofcheck": _proofcheck}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    # The threading-layer fallback notice from numba is not actionable here.
    warnings.filterwarnings("ignore", message=".*TBB.*")
    try:
        _set_threads(args.threads)
        if args.command == "scenario":
            try:
                return _scenario(args)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        r = _Run(args)
        COMMANDS[args.command](r)
        return r.status
    except (SnapBMError, OSError) as exc:
        print(f"snapbm: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main():
    sys.exit(run())
