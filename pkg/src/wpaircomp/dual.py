"""Inner convex subproblem: device amplitudes and the dual certificate.

With the receive vector w held fixed, the joint choice of transmit
amplitudes b_k >= 0 and energy covariance S minimizes

    sum_k (|w^H h_k| b_k - 1)^2
    s.t.  alpha2 b_k^2 <= alpha1 eta h_k^H S h_k,   tr(S) <= P,  S >= 0.

The problem is convex with strong duality; this module maximizes the
Lagrange dual over multipliers (mu, nu) with the ellipsoid method. The
dual is only bounded where F(mu) = nu I - sum_k alpha1 eta mu_k h_k h_k^H
is positive semidefinite, so the search mixes three central cuts:
coordinate cuts for mu, nu >= 0, minimum-eigenpair cuts for F(mu) >= 0,
and supergradient cuts of the dual objective. Amplitudes then follow in
closed form, b_k = |w^H h_k| / (|w^H h_k|^2 + mu_k alpha2).

Internally the search runs on rescaled data (channels by their largest
norm, amplitudes by the full-power harvest scale) so the multipliers are
O(1) regardless of the physical units; results are mapped back exactly.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from ._kernels import STATUS_GAP, STATUS_MAXITER, STATUS_RADIUS, get_backend
from .hermitian import max_abs, min_eigpair

PSD_TOL = 1e-12


class DualInfeasibleError(ValueError):
    """Dual point evaluated outside the PSD-feasible region."""


@dataclass
class DualPoint:
    """Multipliers for the per-device energy constraints (mu) and the
    transmit power budget (nu)."""

    mu: np.ndarray
    nu: float

    def __post_init__(self):
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        self.nu = float(self.nu)
        if np.any(self.mu < 0) or self.nu < 0:
            raise ValueError("dual multipliers must be nonnegative")


@dataclass
class EllipsoidState:
    """Search state over the stacked vector x = [mu; nu]."""

    center: np.ndarray
    shape: np.ndarray
    iteration: int

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.shape = np.asarray(self.shape, dtype=float)
        if not np.all(np.isfinite(self.center)):
            raise ValueError("ellipsoid center must be finite")
        if np.linalg.eigvalsh(self.shape)[0] <= 0:
            raise ValueError("ellipsoid shape matrix must be positive definite")


@dataclass
class InnerOptions:
    radius_tol: float = 1e-9
    gap_tol: float = 0.0  # 0 disables the certified-gap stop (radius rule only)
    max_iter: int | None = None  # default 1000 * (K_active + 1)^2
    radius_scale: float = 10.0
    max_expansions: int = 2
    backend: str = "auto"


@dataclass
class InnerReport:
    status: str
    iterations: int
    objective_cuts: int
    feasibility_cuts: int
    nonnegativity_cuts: int
    expansions: int
    converged: bool
    backend: str
    ellipsoid: EllipsoidState | None = None


@dataclass
class InnerSolution:
    b_tilde: np.ndarray
    dual: DualPoint
    dual_value: float
    primal_value: float
    report: InnerReport | None = None


def channel_gains(w, H):
    """|w^H h_k| for every row h_k of H."""
    return np.abs(np.asarray(H) @ np.conj(np.asarray(w)))


def amplitude_from_dual(w, h, mu_k, alpha2):
    """Closed-form optimal transmit amplitude for one device.

    b = g / (g^2 + mu_k alpha2) with g = |w^H h|; zero when the effective
    gain vanishes.
    """
    if mu_k < 0:
        raise ValueError("mu_k must be nonnegative")
    if alpha2 <= 0:
        raise ValueError("alpha2 must be positive")
    g = abs(complex(np.vdot(np.asarray(w), np.asarray(h))))
    if g == 0.0:
        return 0.0
    return g / (g * g + mu_k * alpha2)


def _amplitudes(gamma, mu, alpha2):
    gamma = np.asarray(gamma, dtype=float)
    den = gamma * gamma + np.asarray(mu, dtype=float) * alpha2
    return np.where(gamma > 0, gamma / np.where(den > 0, den, 1.0), 0.0)


def build_F(dual, channels, alpha1, eta):
    """F(mu) = nu I - sum_k alpha1 eta mu_k h_k h_k^H (Hermitian M x M)."""
    H = channels.H
    coeff = alpha1 * eta * dual.mu
    F = dual.nu * np.eye(channels.M, dtype=np.complex128) - (H.T * coeff) @ H.conj()
    return 0.5 * (F + F.conj().T)


def _require_dual_feasible(dual, channels, params):
    F = build_F(dual, channels, params.alpha1, params.eta)
    lam = float(np.linalg.eigvalsh(F)[0])
    if lam < -PSD_TOL * (1.0 + max_abs(F)):
        raise DualInfeasibleError(
            f"F(mu) has negative eigenvalue {lam:.3e}; use a feasibility cut"
        )
    return F


def dual_value(dual, w, channels, params):
    """Dual objective g(mu, nu) at a PSD-feasible dual point.

    g = sum_k [(g_k b_k - 1)^2 + mu_k alpha2 b_k^2] - nu P with the
    closed-form amplitudes; raises DualInfeasibleError when F(mu) is not
    PSD (where the dual is unbounded below over S).
    """
    _require_dual_feasible(dual, channels, params)
    gamma = channel_gains(w, channels.H)
    b = _amplitudes(gamma, dual.mu, params.alpha2)
    r = gamma * b - 1.0
    return float(np.sum(r * r + dual.mu * params.alpha2 * b * b) - dual.nu * params.P)


def objective_subgradient(dual, w, channels, params):
    """A supergradient of the concave dual objective at (mu, nu).

    Equals [alpha2 b_1^2, ..., alpha2 b_K^2, -P] with the closed-form
    amplitudes at the given point.
    """
    _require_dual_feasible(dual, channels, params)
    gamma = channel_gains(w, channels.H)
    b = _amplitudes(gamma, dual.mu, params.alpha2)
    return np.concatenate([params.alpha2 * b * b, [-params.P]])


def feasibility_cut(dual, channels, params):
    """Violation and cut vector for the PSD constraint on F(mu).

    Returns (lambda_min(F), grad) where grad is the exact gradient of the
    affine constraint function c(mu, nu) = -delta^H F(mu) delta (stored as
    c <= 0) for the fixed minimizing unit eigenvector delta:
    grad = [alpha1 eta |delta^H h_1|^2, ..., alpha1 eta |delta^H h_K|^2,
    -delta^H delta].
    """
    F = build_F(dual, channels, params.alpha1, params.eta)
    lam, delta = min_eigpair(F)
    proj = np.abs(channels.H.conj() @ delta) ** 2
    grad = np.concatenate(
        [params.alpha1 * params.eta * proj, [-float(np.real(np.vdot(delta, delta)))]]
    )
    return lam, grad


_STATUS_NAMES = {
    STATUS_RADIUS: "radius_converged",
    STATUS_GAP: "gap_converged",
    STATUS_MAXITER: "max_iterations",
    3: "degenerate_ellipsoid",
}


def solve_inner(w, channels, params, opts=None):
    """Maximize the dual over {mu >= 0, nu >= 0, F(mu) >= 0} and recover
    the optimal amplitudes.

    Devices with |w^H h_k| = 0 are pinned to b_k = 0 and mu_k = 0 and
    excluded from the search. The ellipsoid starts from the ball centered
    at [0, ..., 0, nu0] prescribed by the rescaled channel norms and is
    re-run with a 100x radius whenever the best point lands near the
    boundary (the initial radius is a heuristic; the final point is always
    certified a posteriori by the KKT audit).
    """
    opts = opts or InnerOptions()
    w = np.asarray(w, dtype=np.complex128)
    if np.all(w == 0):
        raise ValueError("receive vector w must be nonzero")
    H = channels.H
    K = channels.K
    gamma = channel_gains(w, H)
    active = gamma > 0.0

    if not np.any(active):
        dual = DualPoint(np.zeros(K), 0.0)
        val = dual_value(dual, w, channels, params)
        report = InnerReport(
            status="trivial", iterations=0, objective_cuts=0, feasibility_cuts=0,
            nonnegativity_cuts=0, expansions=0, converged=True, backend="none",
        )
        return InnerSolution(np.zeros(K), dual, val, val, report)

    # rescale so the search variables are O(1): channels by the largest
    # norm, amplitudes by the full-power harvest scale
    hnorm2 = np.sum(H.real**2 + H.imag**2, axis=1)
    chi2 = float(np.max(hnorm2[active]))
    beta = np.sqrt(params.alpha1 * params.eta * chi2 * params.P / params.alpha2)
    g_hat = gamma[active] * beta
    Hh = H[active] / np.sqrt(chi2)
    gram = Hh.conj() @ Hh.T

    kact = int(active.sum())
    n = kact + 1
    max_iter = opts.max_iter if opts.max_iter is not None else 1000 * n * n
    nu0 = float(np.max(gram.diagonal().real))
    x0 = np.zeros(n)
    x0[-1] = nu0
    radius = opts.radius_scale * n * max(1.0, nu0)

    backend = get_backend(opts.backend)
    expansions = 0
    while True:
        (best_x, best_val, status, iters, n_obj, n_feas, n_nonneg, center, shape
         ) = backend.ellipsoid_dual_max(
            g_hat, gram, x0, radius, max_iter, opts.radius_tol, opts.gap_tol
        )
        near_edge = best_x is None or (
            np.linalg.norm(best_x - x0) >= 0.9 * radius
        )
        if not near_edge or expansions >= opts.max_expansions:
            break
        expansions += 1
        radius *= 100.0

    if best_x is None:
        raise RuntimeError("ellipsoid search never reached a feasible dual point")

    mu_hat = np.maximum(best_x[:kact], 0.0)
    # project nu down to the exact PSD boundary; this only increases the dual
    if np.any(mu_hat > 0):
        smu = np.sqrt(mu_hat)
        cmat = gram * np.outer(smu, smu)
        nu_hat = max(float(np.linalg.eigvalsh(cmat)[-1]), 0.0)
    else:
        nu_hat = 0.0

    mu = np.zeros(K)
    mu[active] = mu_hat / (params.alpha1 * params.eta * chi2 * params.P)
    dual = DualPoint(mu, nu_hat / params.P)
    b_tilde = _amplitudes(gamma, mu, params.alpha2)
    dval = dual_value(dual, w, channels, params)
    pval = float(np.sum((gamma * b_tilde - 1.0) ** 2))

    kernel_val = best_val + (K - kact)  # inactive devices each contribute 1
    if dval < kernel_val - 1e-9 * (1.0 + abs(kernel_val)):
        warnings.warn(
            f"dual value regression after nu polish: {dval:.12e} < {kernel_val:.12e}",
            RuntimeWarning,
        )

    converged = status in (STATUS_RADIUS, STATUS_GAP)
    # the exact rank-one downdates keep the shape matrix SPD, but at the
    # terminal ~1e-18 eigenvalue scale rounding can leave lambda_min <= 0;
    # repair within rounding so the diagnostic state meets its invariant
    shape = 0.5 * (shape + shape.T)
    ev = np.linalg.eigvalsh(shape)
    ridge = max(0.0, -float(ev[0])) + 1e-15 * max(float(ev[-1]), 0.0) + 1e-300
    shape = shape + ridge * np.eye(shape.shape[0])
    report = InnerReport(
        status=_STATUS_NAMES.get(status, str(status)),
        iterations=iters,
        objective_cuts=n_obj,
        feasibility_cuts=n_feas,
        nonnegativity_cuts=n_nonneg,
        expansions=expansions,
        converged=converged,
        backend="pure" if backend is get_backend("pure") else "compiled",
        ellipsoid=EllipsoidState(center=center, shape=shape, iteration=iters),
    )
    if not converged:
        warnings.warn(
            f"inner dual solve stopped at {report.status} after {iters} iterations",
            RuntimeWarning,
        )
    return InnerSolution(b_tilde, dual, dval, pval, report)
