"""Command-line interface: solve one instance, run a sweep, or validate.

Exit codes: 0 success, 1 invariant failure, 2 configuration error.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from ._kernels import backend_name
from .aircomp import JointOptions, solve_joint
from .channel import sample_channels
from .experiments import (
    SEED_ENV_VAR,
    ConfigError,
    ExperimentConfig,
    _point_setup,
    effective_base_seed,
    emit_csv,
    emit_plot,
    run_sweep,
    validate,
)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="wpaircomp",
        description=(
            "Wireless-powered over-the-air computation: joint transmit-energy "
            "beamforming, device power control and receive beamforming."
        ),
        epilog=(
            f"The environment variable {SEED_ENV_VAR} overrides the config's "
            "base_seed for all verbs."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config (defaults built in)")
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--out", default=".", help="output directory")

    p_solve = sub.add_parser("solve", help="solve one instance and print the audit")
    common(p_solve)

    p_sweep = sub.add_parser("sweep", help="run the configured sweep to CSV + SVG")
    common(p_sweep)
    p_sweep.add_argument("--schemes", help="comma-separated subset of schemes")
    p_sweep.add_argument("--jobs", type=int, help="worker processes")

    p_val = sub.add_parser("validate", help="run the invariant suite")
    common(p_val)
    return parser


def _load_config(args):
    cfg = (
        ExperimentConfig.from_json(args.config)
        if args.config
        else ExperimentConfig()
    )
    if args.seed is not None:
        os.environ[SEED_ENV_VAR] = str(args.seed)
    return cfg


def _cmd_solve(args):
    config = _load_config(args)
    params, model = _point_setup(config, config.sweep_values[0])
    seed = np.random.SeedSequence(
        entropy=effective_base_seed(config), spawn_key=(0, 0)
    )
    channels = sample_channels(
        params, model, config.distance_m, config.rician_factor, seed
    )
    opts = JointOptions(mse_tol=config.mse_tol, max_outer=config.max_outer)
    solution, report = solve_joint(params, channels, opts)
    kkt = report.kkt
    print(f"kernel backend     : {backend_name()}")
    print(f"antennas / devices : {params.M} / {params.K}")
    print(f"converged          : {report.converged} ({report.iterations} iterations)")
    print(f"computation MSE    : {report.mse_trajectory[-1]:.9e}")
    print(f"amplitudes         : {np.array2string(solution.b_tilde, precision=6)}")
    print(f"dual mu            : {np.array2string(report.dual.mu, precision=6)}")
    print(f"dual nu            : {report.dual.nu:.6e}")
    print("kkt residuals (normalized):")
    for name in (
        "amplitude_stationarity",
        "energy_violation",
        "trace_violation",
        "psd_violation",
        "cs_energy",
        "cs_trace",
        "covariance_coupling",
    ):
        print(f"  {name:<24}: {getattr(kkt, name):.3e}")
    print(f"beamformer residual max: {report.beamformer_residual_max:.3e}")
    return 0 if (report.converged and kkt.ok(1e-6)) else 1


def _cmd_sweep(args):
    import dataclasses

    config = _load_config(args)
    if args.schemes:
        subset = [s.strip() for s in args.schemes.split(",") if s.strip()]
        config = dataclasses.replace(config, schemes=subset)
    jobs = args.jobs if args.jobs else config.jobs
    result = run_sweep(config, jobs=jobs)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "sweep.csv")
    svg_path = os.path.join(args.out, "sweep.svg")
    emit_csv(result, csv_path)
    emit_plot(result, svg_path)
    print(f"wrote {csv_path} and {svg_path} ({len(result.rows)} rows)")
    return 0


def _cmd_validate(args):
    config = _load_config(args)
    report = validate(config)
    for line in report.lines():
        print(line)
    return 0 if report.ok else 1


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.verb == "solve":
            return _cmd_solve(args)
        if args.verb == "sweep":
            return _cmd_sweep(args)
        return _cmd_validate(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
