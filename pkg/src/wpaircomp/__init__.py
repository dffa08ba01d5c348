"""Wireless-powered over-the-air computation: joint beamforming library.

A multi-antenna access point charges single-antenna devices in the
downlink and aggregates their analog transmissions in the uplink. The
library jointly optimizes the downlink energy covariance, the per-device
transmit coefficients and the uplink receive vector to minimize the
computation mean-square error of the recovered average, subject to the
transmit power budget and per-device harvested-energy constraints, and
ships the comparison schemes plus a deterministic sweep harness.
"""

from ._kernels import backend_name
from .aircomp import (
    BeamformingSolution,
    JointOptions,
    KKTReport,
    SolverReport,
    compute_mse,
    empirical_mse,
    kkt_audit,
    phase_align,
    receive_beamformer,
    solve_joint,
)
from .channel import (
    ChannelSet,
    NumericalError,
    PathLossModel,
    SystemParams,
    db_to_linear,
    dbm_to_watt,
    harvested_power,
    path_loss,
    sample_channels,
)
from .covariance import (
    CovarianceOptions,
    CovarianceResult,
    EnergyRequirement,
    project_energy,
    project_trace,
    solve_covariance,
)
from .dual import (
    DualInfeasibleError,
    DualPoint,
    EllipsoidState,
    InnerOptions,
    InnerSolution,
    amplitude_from_dual,
    build_F,
    dual_value,
    feasibility_cut,
    objective_subgradient,
    solve_inner,
)
from .hermitian import (
    NotHermitianError,
    NotPositiveDefiniteError,
    hermitian_eig,
    min_eigpair,
    project_psd,
    solve_hpd,
)
from .schemes import (
    SchemeResult,
    SchemeUndefinedError,
    isotropic_scheme,
    time_division_scheme,
)

__version__ = "0.1.0"

__all__ = [
    "BeamformingSolution",
    "ChannelSet",
    "CovarianceOptions",
    "CovarianceResult",
    "DualInfeasibleError",
    "DualPoint",
    "EllipsoidState",
    "EnergyRequirement",
    "InnerOptions",
    "InnerSolution",
    "JointOptions",
    "KKTReport",
    "NotHermitianError",
    "NotPositiveDefiniteError",
    "NumericalError",
    "PathLossModel",
    "SchemeResult",
    "SchemeUndefinedError",
    "SolverReport",
    "SystemParams",
    "amplitude_from_dual",
    "backend_name",
    "build_F",
    "compute_mse",
    "db_to_linear",
    "dbm_to_watt",
    "dual_value",
    "empirical_mse",
    "feasibility_cut",
    "harvested_power",
    "hermitian_eig",
    "isotropic_scheme",
    "kkt_audit",
    "min_eigpair",
    "objective_subgradient",
    "path_loss",
    "phase_align",
    "project_energy",
    "project_psd",
    "project_trace",
    "receive_beamformer",
    "sample_channels",
    "solve_covariance",
    "solve_hpd",
    "solve_inner",
    "solve_joint",
    "time_division_scheme",
]
