"""Deterministic sweep harness: config, trial engine, CSV/plot emission,
and the self-audit used by the `validate` CLI verb.

Every physical quantity in the JSON config carries its unit in the key
name (power_dbm, noise_dbm, distance_m); all computation runs in watts and
linear gains. Per-trial channel seeds derive only from
(base seed, sweep-point index, trial index) through numpy SeedSequence
spawn keys, so results are independent of scheduling and worker count, and
every scheme inside a trial sees the same channel draw (paired
comparisons). The WPAIRCOMP_SEED environment variable overrides the
config's base seed.
"""

import dataclasses
import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .aircomp import (
    JointOptions,
    compute_mse,
    empirical_mse,
    receive_beamformer,
    solve_joint,
)
from .channel import PathLossModel, SystemParams, db_to_linear, dbm_to_watt, sample_channels
from .schemes import SchemeUndefinedError, isotropic_scheme, time_division_scheme

SEED_ENV_VAR = "WPAIRCOMP_SEED"
KNOWN_SCHEMES = ("isotropic", "joint", "time_division")
SWEEP_AXES = ("power_dbm", "devices")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    sweep_axis: str = "power_dbm"
    sweep_values: list = field(default_factory=lambda: [10.0, 15.0, 20.0, 25.0, 30.0])
    antennas: int = 4
    devices: int = 4
    power_dbm: float = 20.0
    noise_dbm: float = -100.0
    eta: float = 0.8
    alpha1: float = 0.5
    alpha2: float = 0.5
    distance_m: object = 10.0  # scalar, or list with one entry per device
    rician_factor: float = 5.0
    pathloss_k0_db: float = -30.0
    pathloss_d0_m: float = 1.0
    pathloss_exponent: float = 3.0
    trials: int = 200
    base_seed: int = 20240801
    schemes: list = field(default_factory=lambda: list(KNOWN_SCHEMES))
    td_cross_harvest: bool = False
    mse_tol: float = 1e-8
    max_outer: int = 200
    validate_instances: int = 8
    jobs: int = 1

    def __post_init__(self):
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"sweep_axis must be one of {SWEEP_AXES}")
        if not self.sweep_values:
            raise ConfigError("sweep_values must be non-empty")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        unknown = set(self.schemes) - set(KNOWN_SCHEMES)
        if unknown:
            raise ConfigError(f"unknown schemes: {sorted(unknown)}")
        if not self.schemes:
            raise ConfigError("schemes must be non-empty")
        if np.ndim(self.distance_m) > 0:
            if self.sweep_axis == "devices":
                raise ConfigError(
                    "distance_m must be a scalar when sweeping the device count"
                )
            if len(self.distance_m) != self.devices:
                raise ConfigError("distance_m list must have one entry per device")
        if self.sweep_axis == "devices":
            for v in self.sweep_values:
                if int(v) != v or v < 1:
                    raise ConfigError("device-count sweep values must be positive integers")

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass
class SweepRow:
    sweep_param: str
    sweep_value: float
    scheme: str
    mean_mse: float
    std_err: float
    trials: int
    failures: int


@dataclass
class SweepResult:
    rows: list
    config: ExperimentConfig


def effective_base_seed(config):
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
    return config.base_seed


def _point_setup(config, value):
    if config.sweep_axis == "power_dbm":
        k = config.devices
        p = dbm_to_watt(float(value))
    else:
        k = int(value)
        p = dbm_to_watt(config.power_dbm)
    params = SystemParams(
        M=config.antennas,
        K=k,
        P=float(p),
        sigma2=float(dbm_to_watt(config.noise_dbm)),
        eta=config.eta,
        alpha1=config.alpha1,
        alpha2=config.alpha2,
    )
    model = PathLossModel(
        k0=float(db_to_linear(config.pathloss_k0_db)),
        d0=config.pathloss_d0_m,
        alpha0=config.pathloss_exponent,
    )
    return params, model


def _solver_options(config):
    return JointOptions(
        mse_tol=config.mse_tol, max_outer=config.max_outer, audit=False
    )


def run_trial(config, base_seed, point_index, trial):
    """All configured schemes on one common channel draw.

    Returns {scheme: mse or None}; None marks a failed (undefined) trial.
    """
    value = config.sweep_values[point_index]
    params, model = _point_setup(config, value)
    seed = np.random.SeedSequence(entropy=base_seed, spawn_key=(point_index, trial))
    channels = sample_channels(
        params, model, config.distance_m, config.rician_factor, seed
    )
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for scheme in config.schemes:
            try:
                if scheme == "joint":
                    _, report = solve_joint(params, channels, _solver_options(config))
                    out[scheme] = report.mse_trajectory[-1]
                elif scheme == "isotropic":
                    out[scheme] = isotropic_scheme(
                        params, channels, _solver_options(config)
                    ).mse
                else:
                    out[scheme] = time_division_scheme(
                        params,
                        channels,
                        include_cross_harvest=config.td_cross_harvest,
                    ).mse
            except SchemeUndefinedError:
                out[scheme] = None
    return out


def _trial_star(args):
    return run_trial(*args)


def run_sweep(config, jobs=None):
    """Run the configured sweep; identical configs give identical results
    regardless of the worker count."""
    jobs = config.jobs if jobs is None else jobs
    base_seed = effective_base_seed(config)
    tasks = [
        (config, base_seed, pi, t)
        for pi in range(len(config.sweep_values))
        for t in range(config.trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_trial_star, tasks, chunksize=8))
    else:
        outcomes = [run_trial(*t) for t in tasks]

    per_point = {}
    for (cfg, _, pi, t), out in zip(tasks, outcomes):
        per_point.setdefault(pi, []).append(out)

    rows = []
    for pi, value in enumerate(config.sweep_values):
        for scheme in sorted(config.schemes):
            vals = np.array(
                [o[scheme] for o in per_point[pi] if o[scheme] is not None],
                dtype=float,
            )
            failures = sum(1 for o in per_point[pi] if o[scheme] is None)
            mean = float(vals.mean()) if vals.size else float("nan")
            se = (
                float(vals.std(ddof=1) / np.sqrt(vals.size))
                if vals.size > 1
                else 0.0
            )
            rows.append(
                SweepRow(
                    sweep_param=config.sweep_axis,
                    sweep_value=float(value),
                    scheme=scheme,
                    mean_mse=mean,
                    std_err=se,
                    trials=int(vals.size),
                    failures=failures,
                )
            )
    rows.sort(key=lambda r: (r.sweep_value, r.scheme))
    return SweepResult(rows=rows, config=config)


CSV_HEADER = "sweep_param,sweep_value,scheme,mean_mse,std_err,trials,failures"


def emit_csv(result, path):
    """Write the sweep table with 10-significant-digit scientific notation,
    sorted by (sweep_value, scheme); byte-identical for identical results."""
    rows = sorted(result.rows, key=lambda r: (r.sweep_value, r.scheme))
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in rows:
                fh.write(
                    f"{r.sweep_param},{r.sweep_value:.10g},{r.scheme},"
                    f"{r.mean_mse:.9e},{r.std_err:.9e},{r.trials},{r.failures}\n"
                )
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from None
    return path


def emit_plot(result, path):
    """Static SVG of mean MSE per scheme on a log axis, deterministic bytes."""
    if not result.rows:
        raise ValueError("cannot plot an empty sweep result")
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "wpaircomp"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        schemes = sorted({r.scheme for r in result.rows})
        markers = {"isotropic": "s", "joint": "o", "time_division": "^"}
        for scheme in schemes:
            pts = sorted(
                [(r.sweep_value, r.mean_mse) for r in result.rows if r.scheme == scheme]
            )
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            ax.semilogy(xs, ys, marker=markers.get(scheme, "x"), label=scheme)
        ax.set_xlabel(result.rows[0].sweep_param)
        ax.set_ylabel("computation MSE")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise OSError(f"cannot write plot to {path}: {exc}") from None
        finally:
            plt.close(fig)
    return path


@dataclass
class ValidationCheck:
    name: str
    passed: bool
    detail: str


@dataclass
class ValidationReport:
    checks: list
    instances: int

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def lines(self):
        out = []
        for c in self.checks:
            out.append(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
        return out


def validate(config):
    """Run the invariant suite on seeded instances of the configured system.

    Checks, per instance: the KKT audit at 1e-6, outer-loop monotonicity,
    convergence at the alternation fixed point, and agreement between the
    analytic and simulated error. Returns a ValidationReport; an empty
    instance list yields a vacuous pass with a warning entry.
    """
    n = config.validate_instances
    base_seed = effective_base_seed(config)
    if n == 0:
        warnings.warn("validate called with zero instances", RuntimeWarning)
        return ValidationReport(
            checks=[ValidationCheck("instances", True, "no instances configured (vacuous pass)")],
            instances=0,
        )
    params, model = _point_setup(config, config.sweep_values[0])
    opts = JointOptions(mse_tol=config.mse_tol, max_outer=config.max_outer)

    kkt_worst = 0.0
    kkt_ok = True
    mono_ok = True
    fp_worst = 0.0
    mc_misses = 0
    conv_ok = True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for i in range(n):
            seed = np.random.SeedSequence(entropy=base_seed, spawn_key=(982451653, i))
            channels = sample_channels(
                params, model, config.distance_m, config.rician_factor, seed
            )
            solution, report = solve_joint(params, channels, opts)
            conv_ok &= report.converged
            kkt_worst = max(kkt_worst, report.kkt.max_residual)
            kkt_ok &= report.kkt.ok(1e-6)
            traj = np.asarray(report.mse_trajectory)
            mono_ok &= bool(np.all(np.diff(traj) <= 1e-9))
            w2 = receive_beamformer(solution.b, channels, params.sigma2)
            mse2 = compute_mse(w2, solution.b, channels, params.sigma2)
            fp_worst = max(fp_worst, (traj[-1] - mse2) / max(traj[-1], 1e-300))
            est, se = empirical_mse(
                solution, channels, params.sigma2, trials=50000, seed=int(1000 + i)
            )
            if abs(est - traj[-1]) > 3 * se:
                mc_misses += 1

    checks = [
        ValidationCheck(
            "kkt_audit",
            kkt_ok and conv_ok,
            f"worst normalized residual {kkt_worst:.3e} (tolerance 1e-6), "
            f"all converged: {conv_ok}",
        ),
        ValidationCheck(
            "mse_monotone", mono_ok, "trajectories non-increasing within 1e-9"
        ),
        ValidationCheck(
            "fixed_point",
            fp_worst <= 1e-3,
            f"extra receive update improves at most {fp_worst:.3e} relative",
        ),
        ValidationCheck(
            "analytic_vs_empirical",
            mc_misses <= max(1, n // 10),
            f"{mc_misses}/{n} instances outside 3 standard errors",
        ),
    ]
    return ValidationReport(checks=checks, instances=n)
