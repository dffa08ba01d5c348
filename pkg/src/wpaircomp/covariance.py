"""Energy-covariance feasibility via Dykstra's alternating projections.

Given required harvested-energy levels c_k = alpha2 b_k^2, any covariance
with

    alpha2 b_k^2 <= alpha1 eta h_k^H S h_k,   tr(S) <= P,   S >= 0

is acceptable; Dykstra's algorithm returns the specific feasible point
closest (Frobenius) to the start S0, which makes the selection
reproducible. Every projection is closed-form: eigenvalue clipping for the
PSD cone and rank-one/identity shifts for the halfspaces.

The iteration runs in the invariant subspace spanned by the channel
vectors (S = U A U^H + c (I - U U^H)); the constraint set and any
isotropic start are invariant under unitaries of the orthogonal
complement, so the reduced solution lifts to the full-space projection
exactly while the per-epoch cost drops from M^3 to r^3, r = rank of the
channel matrix.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from ._kernels import get_backend
from .hermitian import require_hermitian


@dataclass
class EnergyRequirement:
    """Per-device required uplink energy c_k = alpha2 b_k^2."""

    c: np.ndarray

    def __post_init__(self):
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if np.any(self.c < 0) or not np.all(np.isfinite(self.c)):
            raise ValueError("energy requirements must be finite and nonnegative")

    @classmethod
    def from_amplitudes(cls, b_tilde, alpha2):
        b = np.asarray(b_tilde, dtype=float)
        return cls(alpha2 * b * b)


@dataclass
class CovarianceOptions:
    max_epochs: int = 20000
    tol: float = 1e-8
    start: object = None  # None -> (P/M) I; float -> coeff * I; ndarray -> dense path
    backend: str = "auto"


@dataclass
class CovarianceResult:
    S: np.ndarray
    energy_slack: np.ndarray  # h_k^H S h_k - target_k (effective targets)
    trace_slack: float  # P - tr(S)
    min_eigenvalue: float
    converged: bool
    iterations: int
    residual: float
    rescaled_rho: float = 1.0
    monotone_warning: bool = False


def project_trace(S, P):
    """Frobenius projection onto the halfspace tr(S) <= P."""
    S = require_hermitian(S)
    t = float(np.trace(S).real)
    if t <= P:
        return S
    return S - ((t - P) / S.shape[0]) * np.eye(S.shape[0])


def project_energy(S, h, target):
    """Frobenius projection onto the halfspace h^H S h >= target."""
    S = require_hermitian(S)
    h = np.asarray(h, dtype=np.complex128)
    hn2 = float(np.real(np.vdot(h, h)))
    if hn2 == 0.0:
        if target > 0:
            raise ValueError("zero channel with positive energy target is infeasible")
        return S
    e = float(np.real(np.vdot(h, S @ h)))
    if e >= target:
        return S
    return S + ((target - e) / (hn2 * hn2)) * np.outer(h, h.conj())


def dykstra_dense(S0, channels_H, targets, P, max_epochs=20000, tol=1e-8):
    """Full-matrix Dykstra reference (same cycle order as the kernel).

    Used for arbitrary start matrices and as the test oracle for the
    reduced-coordinate kernel.
    """
    S = require_hermitian(S0).copy()
    H = np.asarray(channels_H, dtype=np.complex128)
    targets = np.asarray(targets, dtype=float)
    kk = H.shape[0]
    corr = np.zeros((kk + 2,) + S.shape, dtype=np.complex128)
    t_scale = float(targets.max(initial=0.0))
    denom = np.maximum(targets, 1e-12 * t_scale if t_scale > 0 else 1.0)

    resid_hist = []
    converged = False
    best_resid = np.inf
    best_epoch = 0
    for ep in range(int(max_epochs)):
        z = S + corr[0]
        y = project_trace(z, P)
        corr[0] = z - y
        S = y
        for j in range(kk):
            z = S + corr[1 + j]
            y = project_energy(z, H[j], targets[j])
            corr[1 + j] = z - y
            S = y
        z = S + corr[kk + 1]
        z = 0.5 * (z + z.conj().T)
        w, v = np.linalg.eigh(z)
        y = (v * np.maximum(w, 0.0)) @ v.conj().T if w[0] < 0 else z
        y = 0.5 * (y + y.conj().T)
        corr[kk + 1] = z - y
        S = y

        en = np.real(np.einsum("ki,ij,kj->k", H.conj(), S, H))
        rel_en = float(np.max((targets - en) / denom, initial=0.0))
        rel_tr = max(float(np.trace(S).real) - P, 0.0) / P
        resid = max(rel_en, rel_tr)
        resid_hist.append(resid)
        if resid <= tol:
            converged = True
            break
        if resid < best_resid * 0.995:
            best_resid = resid
            best_epoch = ep
        elif ep - best_epoch >= 200:
            break
    return S, converged, len(resid_hist), np.asarray(resid_hist)


def _channel_basis(H):
    """Orthonormal basis of span{h_k} and the reduced channels U^H h_k."""
    cols = H.T  # (M, K), column k is h_k
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    r = int(np.sum(s > s[0] * 1e-12)) if s.size else 0
    u = u[:, :r]
    return u, u.conj().T @ cols


def _necessary_rho(channels, targets, params):
    """Largest rho <= 1 with rho^2 * target_k <= P ||h_k||^2 for all k."""
    hnorm2 = np.sum(channels.H.real**2 + channels.H.imag**2, axis=1)
    cap = params.P * hnorm2
    pos = targets > 0
    if not np.any(pos):
        return 1.0
    rho2 = float(np.min(cap[pos] / targets[pos]))
    return min(1.0, np.sqrt(max(rho2, 0.0)))


def solve_covariance(channels, req, params, opts=None):
    """Feasible energy covariance for the given requirements.

    Runs Dykstra from S0 = (P/M) I (configurable); if the run does not
    converge and the per-constraint necessary conditions
    alpha2 b_k^2 <= alpha1 eta P ||h_k||^2 fail, all amplitudes are scaled
    down by the largest factor rho <= 1 restoring them and the solve is
    retried once. `rescaled_rho` reports the factor so callers can shrink
    their amplitudes to match; a result that still does not converge is
    returned flagged.
    """
    opts = opts or CovarianceOptions()
    if req.c.shape != (channels.K,):
        raise ValueError("requirement vector must have one entry per device")
    targets0 = req.c / (params.alpha1 * params.eta)

    rho = 1.0
    attempt = _solve_once(channels, targets0, params, opts)
    if not attempt[0]:
        rho = _necessary_rho(channels, targets0, params)
        if rho < 1.0:
            warnings.warn(
                f"energy requirements violate the per-device power caps; "
                f"retrying with amplitudes scaled by rho={rho:.9g}",
                RuntimeWarning,
            )
            attempt = _solve_once(channels, targets0 * rho * rho, params, opts)

    converged, S, epochs, resid, hist = attempt
    targets_eff = targets0 * rho * rho

    if hist.size > 11:
        tail = hist[10:]
        if np.any(tail[1:] > tail[:-1] * (1.0 + 1e-9) + 1e-15):
            warnings.warn(
                "Dykstra residual increased after burn-in; monitor flagged",
                RuntimeWarning,
            )
            monotone_warning = True
        else:
            monotone_warning = False
    else:
        monotone_warning = False

    en = np.real(np.einsum("ki,ij,kj->k", channels.H.conj(), S, channels.H))
    result = CovarianceResult(
        S=S,
        energy_slack=en - targets_eff,
        trace_slack=params.P - float(np.trace(S).real),
        min_eigenvalue=float(np.linalg.eigvalsh(S)[0]),
        converged=converged,
        iterations=epochs,
        residual=float(hist[-1]) if hist.size else 0.0,
        rescaled_rho=rho,
        monotone_warning=monotone_warning,
    )
    if not converged:
        warnings.warn(
            f"covariance feasibility did not converge within {epochs} epochs "
            f"(residual {result.residual:.3e})",
            RuntimeWarning,
        )
    return result


def _solve_once(channels, targets, params, opts):
    M = channels.M
    start = opts.start
    if start is None:
        coeff = params.P / M
    elif np.isscalar(start):
        coeff = float(start)
    else:
        S0 = require_hermitian(start)
        S, converged, epochs, hist = dykstra_dense(
            S0, channels.H, targets, params.P, opts.max_epochs, opts.tol
        )
        return converged, S, epochs, hist[-1] if hist.size else 0.0, hist

    u, hred = _channel_basis(channels.H)
    backend = get_backend(opts.backend)
    a, c, epochs, converged, hist = backend.dykstra_reduced(
        hred, targets, params.P, M, coeff, opts.max_epochs, opts.tol
    )
    S = u @ a @ u.conj().T
    if u.shape[1] < M:
        S = S + c * (np.eye(M) - u @ u.conj().T)
    S = 0.5 * (S + S.conj().T)
    return converged, S, epochs, hist[-1] if hist.size else 0.0, hist
