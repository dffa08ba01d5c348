"""Outer alternating optimization of the computation-error objective.

One iteration alternates (a) the inner convex solve for amplitudes, the
dual certificate and a feasible energy covariance at the current receive
vector, with transmit phases aligned so every w^H h_k b_k is real
nonnegative, and (b) the closed-form receive-vector update

    w = (sum_k |b_k|^2 h_k h_k^H + sigma2 I)^{-1} sum_k b_k h_k,

the unique minimizer of the error objective for fixed b. Each half step
is a per-block optimum, so the mean-square error sequence is
non-increasing; the loop stops when the relative decrement falls below
`mse_tol`. A final tight inner solve at the terminal receive vector makes
the returned solution and dual certificate mutually consistent, which the
KKT audit verifies a posteriori.
"""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .covariance import CovarianceOptions, EnergyRequirement, solve_covariance
from .dual import DualPoint, InnerOptions, channel_gains, solve_inner
from .hermitian import NotPositiveDefiniteError, solve_hpd

_ACCEPT_SLACK = 1e-12


@dataclass
class BeamformingSolution:
    """Energy covariance, receive vector and transmit coefficients."""

    S: np.ndarray
    w: np.ndarray
    b: np.ndarray
    b_tilde: np.ndarray


@dataclass
class KKTReport:
    """Normalized optimality residuals of a converged solution."""

    amplitude_stationarity: float
    energy_violation: float
    trace_violation: float
    psd_violation: float
    cs_energy: float
    cs_trace: float
    covariance_coupling: float

    @property
    def max_residual(self):
        return max(
            self.amplitude_stationarity,
            self.energy_violation,
            self.trace_violation,
            self.psd_violation,
            self.cs_energy,
            self.cs_trace,
            self.covariance_coupling,
        )

    def ok(self, tol=1e-6):
        return self.max_residual <= tol


@dataclass
class SolverReport:
    mse_trajectory: list
    inner_reports: list
    kkt: KKTReport | None
    converged: bool
    iterations: int
    dual: DualPoint | None = None
    warnings: list = field(default_factory=list)
    beamformer_residual_max: float = 0.0
    iterates: list | None = None  # per-iteration solutions when recorded


@dataclass
class JointOptions:
    mse_tol: float = 1e-8
    max_outer: int = 200
    inner: InnerOptions = field(default_factory=InnerOptions)
    covariance: CovarianceOptions = field(default_factory=CovarianceOptions)
    # intermediate iterations run the inner solve at these looser stopping
    # tolerances; the final solve always uses `inner` as given
    coarse_radius_tol: float | None = 1e-6
    coarse_gap_tol: float | None = 1e-7
    audit: bool = True
    record_iterates: bool = False


def phase_align(w, h, b_tilde):
    """Transmit coefficient whose effective gain w^H h b is real nonnegative.

    Returns ((w^H h)^* / |w^H h|) * b_tilde, or 0 for a vanishing gain.
    """
    if b_tilde < 0:
        raise ValueError("b_tilde must be nonnegative")
    wh = complex(np.vdot(np.asarray(w), np.asarray(h)))
    if wh == 0:
        return 0.0 + 0.0j
    return np.conj(wh) / abs(wh) * b_tilde


def _align_all(w, H, b_tilde):
    wh = H @ np.conj(w)
    mag = np.abs(wh)
    safe = np.where(mag > 0, mag, 1.0)
    return np.where(mag > 0, np.conj(wh) / safe * b_tilde, 0.0 + 0.0j)


def receive_beamformer(b, channels, sigma2):
    """Minimizer of the error objective over the receive vector.

    Solves the normal equations (sum |b_k|^2 h_k h_k^H + sigma2 I) w =
    sum b_k h_k; sigma2 > 0 keeps the system positive definite. With fewer
    devices than antennas the equivalent K x K form
    w = C (C^H C + sigma2 I)^{-1} 1, C = [b_1 h_1, ..., b_K h_K], avoids
    the K zero modes that would otherwise be regularized by sigma2 alone,
    so vanishing noise floors stay solvable.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    b = np.asarray(b, dtype=np.complex128)
    H = channels.H
    m, k = channels.M, channels.K

    def direct():
        gram = (H.T * np.abs(b) ** 2) @ H.conj() + sigma2 * np.eye(m)
        return solve_hpd(gram, H.T @ b)

    def woodbury():
        c = H.T * b  # column k is b_k h_k
        gram = c.conj().T @ c + sigma2 * np.eye(k)
        return c @ solve_hpd(gram, np.ones(k))

    first, second = (woodbury, direct) if k < m else (direct, woodbury)
    try:
        return first()
    except NotPositiveDefiniteError:
        return second()


def beamformer_residual(w, b, channels, sigma2):
    """Relative residual of the receive-vector normal equations."""
    b = np.asarray(b, dtype=np.complex128)
    H = channels.H
    gram = (H.T * np.abs(b) ** 2) @ H.conj() + sigma2 * np.eye(channels.M)
    rhs = H.T @ b
    nr = float(np.linalg.norm(rhs))
    if nr == 0.0:
        return float(np.linalg.norm(gram @ w))
    return float(np.linalg.norm(gram @ w - rhs)) / nr


def compute_mse(w, b, channels, sigma2, K=None):
    """Computation mean-square error of the recovered average.

    (1/K^2) * (sum_k |w^H h_k b_k - 1|^2 + ||w||^2 sigma2).
    """
    K = channels.K if K is None else K
    w = np.asarray(w, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    wh = channels.H @ np.conj(w)
    mis = np.abs(wh * b - 1.0) ** 2
    noise = float(np.real(np.vdot(w, w))) * sigma2
    return float((np.sum(mis) + noise) / K**2)


def empirical_mse(
    solution, channels, sigma2, K=None, trials=100000, seed=0,
    distribution="gaussian", chunk=65536,
):
    """Monte Carlo estimate of the computation error.

    Simulates zero-mean unit-variance device symbols and circularly
    symmetric receiver noise, forms the recovered average and accumulates
    the squared deviation from the true average. Trials are drawn in
    fixed-size chunks with one RNG substream per chunk, so the estimate is
    reproducible for a given seed no matter how the chunks are scheduled.

    Returns (estimate, standard_error).
    """
    if trials < 1000:
        raise ValueError("need at least 1000 trials for a usable estimate")
    K = channels.K if K is None else K
    w = np.asarray(solution.w, dtype=np.complex128)
    b = np.asarray(solution.b, dtype=np.complex128)
    a = channels.H @ np.conj(w) * b - 1.0  # per-device misalignment factors
    noise_scale = np.sqrt(sigma2 / 2.0)

    total = 0
    s1 = 0.0
    s2 = 0.0
    n_chunks = (trials + chunk - 1) // chunk
    for ci in range(n_chunks):
        m = min(chunk, trials - ci * chunk)
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(ci,))
        )
        if distribution == "gaussian":
            s = rng.standard_normal((m, K))
        elif distribution == "rademacher":
            s = rng.integers(0, 2, size=(m, K)) * 2.0 - 1.0
        else:
            raise ValueError(f"unknown symbol distribution {distribution!r}")
        z = rng.standard_normal((m, channels.M)) + 1j * rng.standard_normal(
            (m, channels.M)
        )
        z *= noise_scale
        err = (s @ a + z @ np.conj(w)) / K
        e2 = err.real**2 + err.imag**2
        total += m
        s1 += float(np.sum(e2))
        s2 += float(np.sum(e2 * e2))

    mean = s1 / total
    var = max(s2 - total * mean * mean, 0.0) / (total - 1)
    return mean, float(np.sqrt(var / total))


def kkt_audit(solution, dual, channels, params):
    """Normalized first-order optimality residuals for a solution/dual pair.

    Covers amplitude stationarity against the closed-form power control,
    primal feasibility of the energy/trace/PSD constraints, complementary
    slackness of both multiplier families, the coupling term
    tr(F(mu) S), and the receive-vector normal equations.
    """
    from .dual import _amplitudes, build_F

    H = channels.H
    gamma = channel_gains(solution.w, H)
    bt = np.asarray(solution.b_tilde, dtype=float)

    b_eq = _amplitudes(gamma, dual.mu, params.alpha2)
    denom = np.where(b_eq > 0, b_eq, 1.0)
    stationarity = float(np.max(np.abs(bt - b_eq) / denom, initial=0.0))

    harvested = params.alpha1 * params.eta * np.real(
        np.einsum("ki,ij,kj->k", H.conj(), solution.S, H)
    )
    used = params.alpha2 * bt * bt
    scale = np.maximum(np.maximum(used, harvested), 1e-300)
    energy_violation = float(np.max((used - harvested) / scale, initial=0.0))

    tr = float(np.trace(solution.S).real)
    trace_violation = max(tr - params.P, 0.0) / params.P
    min_eig = float(np.linalg.eigvalsh(solution.S)[0])
    psd_violation = max(-min_eig, 0.0) / (params.P / params.M)

    cs_energy = float(
        np.max(np.abs(dual.mu * (used - harvested)) / (1.0 + used), initial=0.0)
    )
    cs_trace = abs(dual.nu * (tr - params.P)) / params.P

    F = build_F(dual, channels, params.alpha1, params.eta)
    coupling_raw = abs(float(np.trace(F @ solution.S).real))
    coupling = coupling_raw / max(dual.nu * params.P, 1e-300)
    if dual.nu == 0.0:
        coupling = 0.0 if coupling_raw <= 1e-30 else coupling

    return KKTReport(
        amplitude_stationarity=stationarity,
        energy_violation=energy_violation,
        trace_violation=trace_violation,
        psd_violation=psd_violation,
        cs_energy=cs_energy,
        cs_trace=cs_trace,
        covariance_coupling=coupling,
    )


def _initial_state(params, channels):
    H = channels.H
    hnorm2 = np.sum(H.real**2 + H.imag**2, axis=1)
    S0 = (params.P / params.M) * np.eye(params.M, dtype=np.complex128)
    bt0 = np.sqrt(
        params.alpha1 * params.eta * (params.P / params.M) * hnorm2 / params.alpha2
    )
    w_mr = H.sum(axis=0)
    nm = np.linalg.norm(w_mr)
    if nm > 0:
        w_mr = w_mr / nm
    else:
        w_mr = np.zeros(params.M, dtype=np.complex128)
        w_mr[0] = 1.0
    b0 = _align_all(w_mr, H, bt0)
    w0 = receive_beamformer(b0, channels, params.sigma2)
    return S0, bt0, b0, w0, w_mr


def _feasible_step(w, channels, params, inner_opts, cov_opts, notes, tag):
    """Inner solve plus a covariance that certifies the amplitudes.

    Requirement vectors from an eps-accurate dual are eps-infeasible in
    general, and the feasibility solve then floors at residual ~eps. The
    returned amplitudes are therefore clamped to what the achieved
    covariance actually delivers, which keeps every iterate exactly
    feasible at O(eps^2) cost in the objective.
    """
    inner = solve_inner(w, channels, params, inner_opts)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cov = solve_covariance(
            channels,
            EnergyRequirement.from_amplitudes(inner.b_tilde, params.alpha2),
            params,
            cov_opts,
        )
    for item in caught:
        notes.append(f"{tag}: {item.message}")
    S = cov.S
    tr = float(np.trace(S).real)
    if tr > params.P:
        S = S * (params.P / tr)  # uniform shrink keeps PSD and the energies' ratios
        cov = replace(cov, S=S, trace_slack=0.0)
    bt = inner.b_tilde * cov.rescaled_rho
    harvested = params.alpha1 * params.eta * np.real(
        np.einsum("ki,ij,kj->k", channels.H.conj(), S, channels.H)
    )
    caps = np.sqrt(np.maximum(harvested, 0.0) / params.alpha2)
    shaved = bt > caps
    if np.any(shaved):
        rel = float(np.max((bt[shaved] - caps[shaved]) / np.maximum(bt[shaved], 1e-300)))
        if rel > 1e-6:
            notes.append(f"{tag}: amplitudes clamped by up to {rel:.3e} relative")
        bt = np.minimum(bt, caps)
    return inner, cov, bt


def solve_joint(params, channels, opts=None):
    """Alternating optimization of covariance, amplitudes and receive vector.

    Returns (BeamformingSolution, SolverReport). The reported trajectory
    holds the error after every accepted outer iteration (starting with the
    feasible initialization) and is non-increasing; `converged` records
    whether the relative decrement fell below `mse_tol` within `max_outer`
    iterations.
    """
    opts = opts or JointOptions()
    coarse = InnerOptions(
        radius_tol=(
            opts.inner.radius_tol
            if opts.coarse_radius_tol is None
            else max(opts.inner.radius_tol, opts.coarse_radius_tol)
        ),
        gap_tol=(
            opts.inner.gap_tol
            if opts.coarse_gap_tol is None
            else max(opts.inner.gap_tol, opts.coarse_gap_tol)
        ),
        max_iter=opts.inner.max_iter,
        radius_scale=opts.inner.radius_scale,
        max_expansions=opts.inner.max_expansions,
        backend=opts.inner.backend,
    )

    notes = []
    S0, bt0, b, w, w_mr = _initial_state(params, channels)
    mse_prev = compute_mse(w, b, channels, params.sigma2)
    trajectory = [mse_prev]
    inner_reports = []
    # recorded iterates pair each amplitude vector with the receive vector
    # it was phase-aligned to
    iterates = [] if opts.record_iterates else None
    if iterates is not None:
        iterates.append(BeamformingSolution(S=S0, w=w_mr, b=b, b_tilde=bt0))
    resid_max = beamformer_residual(w, b, channels, params.sigma2)
    converged = False
    iterations = 0

    for it in range(1, opts.max_outer + 1):
        iterations = it
        inner, cov, bt = _feasible_step(
            w, channels, params, coarse, opts.covariance, notes, f"iteration {it}"
        )
        b_new = _align_all(w, channels.H, bt)
        w_new = receive_beamformer(b_new, channels, params.sigma2)
        resid_max = max(
            resid_max, beamformer_residual(w_new, b_new, channels, params.sigma2)
        )
        mse_new = compute_mse(w_new, b_new, channels, params.sigma2)
        inner_reports.append(inner.report)
        if not inner.report.converged:
            notes.append(f"iteration {it}: inner solve not converged")

        if mse_new > mse_prev + _ACCEPT_SLACK * (1.0 + mse_prev):
            notes.append(
                f"iteration {it}: no improvement at inner tolerance, stopping"
            )
            converged = True
            break
        if iterates is not None:
            iterates.append(BeamformingSolution(S=cov.S, w=w, b=b_new, b_tilde=bt))
        b, w = b_new, w_new
        trajectory.append(mse_new)
        decrement = mse_prev - mse_new
        mse_prev = mse_new
        if decrement < opts.mse_tol * max(mse_prev, 1e-300):
            converged = True
            break

    # final tight half-step so the returned amplitudes, covariance and dual
    # certificate all belong to the returned receive vector
    inner_f, cov_f, bt_f = _feasible_step(
        w, channels, params, opts.inner, opts.covariance, notes, "final refinement"
    )
    b_f = _align_all(w, channels.H, bt_f)
    mse_f = compute_mse(w, b_f, channels, params.sigma2)
    if mse_f > mse_prev + 1e-9:
        notes.append("final refinement increased the error beyond tolerance")
        warnings.warn(notes[-1], RuntimeWarning)
    trajectory.append(mse_f)

    solution = BeamformingSolution(S=cov_f.S, w=w, b=b_f, b_tilde=bt_f)
    if iterates is not None:
        iterates.append(solution)
    kkt = kkt_audit(solution, inner_f.dual, channels, params) if opts.audit else None
    report = SolverReport(
        mse_trajectory=trajectory,
        inner_reports=inner_reports,
        kkt=kkt,
        converged=converged,
        iterations=iterations,
        dual=inner_f.dual,
        warnings=notes,
        beamformer_residual_max=resid_max,
        iterates=iterates,
    )
    return solution, report
