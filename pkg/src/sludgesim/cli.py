"""Command-line entry point: one config document, one experiment, one run.

Each subcommand checks that the config's ``experiment.kind`` matches the
invocation, runs the experiment, and writes fixed-name artifacts into the
output directory: the experiment's CSV table(s), a PNG rendering where one
makes sense, and ``manifest.json`` recording config hash, seed, and
package versions.  Stdout carries a short human-readable summary; CSV
files are the numeric contract.

Exit codes: 0 success, 2 unusable config (syntax, schema, or model
violations), 3 numerical failure during computation, 4 I/O failure.
Replica parallelism honors the SLUDGESIM_WORKERS environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from . import io, report
from .analysis import (METHOD_MC, empirical_density, estimate_lambda_mc,
                       effluent_curve, lambda_closed_form, washout_time)
from .engine import simulate
from .errors import SludgesimError
from .model import SystemState
from .rng import RngStream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPUTE = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sludgesim",
        description="Simulation and threshold analysis of a regime-switching "
                    "stochastic chemostat.",
        epilog="Set SLUDGESIM_WORKERS to cap replica parallelism "
               "(results are identical at any worker count).")
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "simulate": "integrate one full-system sample path",
        "lambda": "compute the persistence threshold (MC or quadrature)",
        "washout": "solve for the wash-out residence time by bisection",
        "sweep": "threshold and effluent mean across a residence-time grid",
        "density": "empirical (S, X) occupation histogram per regime",
    }
    for kind in io.EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=descriptions[kind])
        p.add_argument("--config", required=True, metavar="PATH",
                       help="YAML experiment document")
        p.add_argument("--seed", type=int, default=None, metavar="U64",
                       help="override the config's master seed")
        p.add_argument("--output", default=None, metavar="DIR",
                       help="override the config's output directory")
    return parser


# ---------------------------------------------------------------------------
# experiment runners: write files into outdir, return (names, summary lines)
# ---------------------------------------------------------------------------

def _run_simulate(config: io.RunConfig, outdir: Path):
    st = config.settings
    init = SystemState(0.0, st.s_init, st.x_init, st.regime_init)
    traj = simulate(config.model, init, st.horizon, config.integrator,
                    RngStream(config.seed))
    io.write_trajectory_csv(outdir / "trajectory.csv", traj)
    report.render_paths(outdir / "paths.png", traj, config.model)
    term = traj.terminal
    return ["trajectory.csv", "paths.png"], [
        f"simulated T = {st.horizon:g} day, {len(traj)} recorded samples",
        f"terminal: S = {term.s:.6g}, X = {term.x:.6g}, "
        f"regime = {term.regime + 1}",
        f"substrate floor hits: {traj.floor_hits}",
    ]


def _run_lambda(config: io.RunConfig, outdir: Path):
    st = config.settings
    if st.method == METHOD_MC:
        est = estimate_lambda_mc(config.model, config.integrator, st.burn_in,
                                 st.horizon, st.replicas, RngStream(config.seed))
    else:
        est = lambda_closed_form(config.model)
    io.write_lambda_csv(outdir / "lambda.csv", est)
    return ["lambda.csv"], [
        f"lambda = {est.value:.8g} +- {est.std_error:.3g} ({est.method})",
    ]


def _run_washout(config: io.RunConfig, outdir: Path):
    st = config.settings
    result = washout_time(config.model, st.theta_lo, st.theta_hi, st.tol,
                          st.method, config=config.integrator,
                          burn_in=st.burn_in, horizon=st.horizon,
                          replicas=st.replicas, rng=RngStream(config.seed),
                          max_escalations=st.max_escalations)
    io.write_washout_csv(outdir / "washout.csv", result)
    lines = [
        f"wash-out time theta0 = {result.theta0:.8g} "
        f"({result.iterations} bisection iterations, {result.method})",
        f"|lambda(theta0)| = {result.lambda_at_root:.3g}",
    ]
    if result.escalations:
        lines.append(f"MC sign tests escalated {result.escalations}x")
    return ["washout.csv"], lines


def _run_sweep(config: io.RunConfig, outdir: Path):
    st = config.settings
    points = effluent_curve(config.model, st.thetas, lambda_method=st.method,
                            lambda_config=config.integrator,
                            burn_in=st.burn_in, horizon=st.horizon,
                            replicas=st.replicas, es_burn_in=st.es_burn_in,
                            es_horizon=st.es_horizon, es_replicas=st.es_replicas,
                            x0=st.x_init, rng=RngStream(config.seed))
    io.write_sweep_csv(outdir / "sweep.csv", points)
    report.render_sweep(outdir / "sweep.png", points)
    lines = [f"{len(points)} residence times:"]
    lines += [f"  theta = {p.theta:<8g} lambda = {p.lam:+.6g}  "
              f"mean S = {p.es_star:.6g}" for p in points]
    return ["sweep.csv", "sweep.png"], lines


def _run_density(config: io.RunConfig, outdir: Path):
    st = config.settings
    rng = RngStream(config.seed)
    init = SystemState(0.0, st.s_init, st.x_init, st.regime_init)
    trajectories = [
        simulate(config.model, init, st.horizon, config.integrator,
                 rng.substream(r))
        for r in range(st.replicas)
    ]
    hist = empirical_density(trajectories, s_bins=st.s_bins, x_bins=st.x_bins,
                             burn_in=st.burn_in, s_range=st.s_range,
                             x_range=st.x_range)
    io.write_histogram_csv(outdir / "histogram.csv", hist)
    report.render_density(outdir / "density.png", hist)
    occupancy = hist.mass.sum(axis=(1, 2))
    return ["histogram.csv", "density.png"], [
        f"{hist.total_weight} samples binned from {st.replicas} trajectories",
        "regime occupancy: " + ", ".join(f"{v:.4f}" for v in occupancy),
    ]


_RUNNERS = {
    "simulate": _run_simulate,
    "lambda": _run_lambda,
    "washout": _run_washout,
    "sweep": _run_sweep,
    "density": _run_density,
}


def run(config: io.RunConfig) -> list[str]:
    """Execute the experiment and emit its artifacts; returns file names."""
    t0 = time.perf_counter()
    outdir = config.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    names, lines = _RUNNERS[config.experiment](config, outdir)
    io.write_manifest(outdir / "manifest.json", config, names,
                      time.perf_counter() - t0)
    for line in lines:
        print(line)
    print(f"wrote {', '.join(names)} + manifest.json -> {outdir}")
    return [*names, "manifest.json"]


def _fail(code: int, phase: str, exc: Exception,
          outdir: Path | None) -> int:
    record = {"error": type(exc).__name__, "phase": phase,
              "message": str(exc), "exit_code": code}
    print(f"error [{phase}]: {type(exc).__name__}: {exc}", file=sys.stderr)
    if outdir is not None:
        try:
            outdir.mkdir(parents=True, exist_ok=True)
            with open(outdir / "error.json", "w") as f:
                json.dump(record, f, indent=2)
                f.write("\n")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        config = io.load_config(args.config)
        if config.experiment != args.command:
            raise io.SchemaError(
                "kind", f"config describes a {config.experiment!r} experiment "
                        f"but was invoked as {args.command!r}")
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise io.SchemaError("seed", f"--seed must be a 64-bit "
                                             f"unsigned integer, got {args.seed}")
            config = dataclasses.replace(config, seed=args.seed)
        if args.output is not None:
            config = dataclasses.replace(config, output_dir=Path(args.output))
    except OSError as exc:
        return _fail(EXIT_IO, "config", exc, None)
    except SludgesimError as exc:
        return _fail(EXIT_CONFIG, "config", exc, None)

    try:
        run(config)
    except OSError as exc:
        return _fail(EXIT_IO, "write", exc, config.output_dir)
    except SludgesimError as exc:
        return _fail(EXIT_COMPUTE, "compute", exc, config.output_dir)
    return EXIT_OK
