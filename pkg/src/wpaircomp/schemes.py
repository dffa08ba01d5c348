"""Comparison schemes evaluated against the joint design.

`isotropic_scheme` keeps the energy covariance fixed at (P/M) I and
alternates the per-device amplitude clipping with the closed-form receive
update, mirroring the joint solver's loop with the covariance degree of
freedom removed.

`time_division_scheme` charges one device per equal downlink subslot with
full-power maximum-ratio transmission and aggregates with uniform-forcing
channel inversion: every effective uplink gain is forced to the same
constant, so the misalignment error is identically zero and the error is
pure amplified noise, sigma2 / (c^2 K^2). The common amplitude c is set by
the most energy-starved device. By default a device banks energy during
every subslot (physically accurate); `include_cross_harvest=False`
restricts it to its own charging subslot, which is how the sweep harness
runs the scheme by default.
"""

from dataclasses import dataclass

import numpy as np

from .aircomp import (
    JointOptions,
    _ACCEPT_SLACK,
    _align_all,
    compute_mse,
    receive_beamformer,
)


class SchemeUndefinedError(RuntimeError):
    """The scheme's construction is undefined for this channel draw."""


@dataclass
class SchemeResult:
    scheme: str
    solution: object  # BeamformingSolution
    mse: float
    converged: bool = True
    iterations: int = 0
    mse_trajectory: list | None = None


def isotropic_scheme(params, channels, opts=None):
    """Alternating amplitudes/receive-vector design under S = (P/M) I."""
    from .aircomp import BeamformingSolution

    opts = opts or JointOptions()
    H = channels.H
    hnorm2 = np.sum(H.real**2 + H.imag**2, axis=1)
    S = (params.P / params.M) * np.eye(params.M, dtype=np.complex128)
    caps = np.sqrt(
        params.alpha1 * params.eta * (params.P / params.M) * hnorm2 / params.alpha2
    )

    w_mr = H.sum(axis=0)
    nm = np.linalg.norm(w_mr)
    w_mr = w_mr / nm if nm > 0 else np.eye(params.M)[0].astype(complex)
    b = _align_all(w_mr, H, caps)
    w = receive_beamformer(b, channels, params.sigma2)
    mse_prev = compute_mse(w, b, channels, params.sigma2)
    trajectory = [mse_prev]
    converged = False
    iterations = 0

    for it in range(1, opts.max_outer + 1):
        iterations = it
        gamma = np.abs(H @ np.conj(w))
        bt = np.where(gamma > 0, np.minimum(1.0 / np.where(gamma > 0, gamma, 1.0), caps), 0.0)
        b_new = _align_all(w, H, bt)
        w_new = receive_beamformer(b_new, channels, params.sigma2)
        mse_new = compute_mse(w_new, b_new, channels, params.sigma2)
        if mse_new > mse_prev + _ACCEPT_SLACK * (1.0 + mse_prev):
            converged = True
            break
        b, w = b_new, w_new
        trajectory.append(mse_new)
        decrement = mse_prev - mse_new
        mse_prev = mse_new
        if decrement < opts.mse_tol * max(mse_prev, 1e-300):
            converged = True
            break

    # final half-step at the terminal receive vector
    gamma = np.abs(H @ np.conj(w))
    bt = np.where(gamma > 0, np.minimum(1.0 / np.where(gamma > 0, gamma, 1.0), caps), 0.0)
    b = _align_all(w, H, bt)
    mse = compute_mse(w, b, channels, params.sigma2)
    trajectory.append(mse)

    solution = BeamformingSolution(S=S, w=w, b=b, b_tilde=bt)
    return SchemeResult(
        scheme="isotropic", solution=solution, mse=mse, converged=converged,
        iterations=iterations, mse_trajectory=trajectory,
    )


def time_division_scheme(
    params, channels, include_cross_harvest=True, aggregation="channel_sum"
):
    """Per-device MRT charging subslots plus uniform-forcing inversion.

    Subslot j (length alpha1/K) uses covariance P * hhat_j hhat_j^H, so
    device k banks E_k = (alpha1/K) eta P sum_j |h_k^H hhat_j|^2 (set
    `include_cross_harvest=False` to credit only the own subslot). The
    aggregation direction is the normalized channel sum (or the dominant
    eigenvector of sum_k h_k h_k^H); with gains g_k = wbar^H h_k the common
    amplitude is c = min_k |g_k| sqrt(E_k / alpha2), coefficients
    b_k = c g_k^* / |g_k|^2 and receive vector w = wbar / c, so
    w^H h_k b_k = 1 for every device and the error is exactly
    sigma2 / (c^2 K^2). Raises SchemeUndefinedError when any g_k vanishes.
    """
    from .aircomp import BeamformingSolution

    H = channels.H
    K, M = H.shape
    norms = np.linalg.norm(H, axis=1)
    hn = H / norms[:, None]

    cross = np.abs(H.conj() @ hn.T) ** 2  # |h_k^H hhat_j|^2
    if include_cross_harvest:
        energy = (params.alpha1 / K) * params.eta * params.P * cross.sum(axis=1)
    else:
        energy = (params.alpha1 / K) * params.eta * params.P * np.diag(cross).copy()

    if aggregation == "channel_sum":
        wbar = H.sum(axis=0)
    elif aggregation == "dominant_eigenvector":
        gram = H.T @ H.conj()
        _, v = np.linalg.eigh(0.5 * (gram + gram.conj().T))
        wbar = v[:, -1]
    else:
        raise ValueError(f"unknown aggregation rule {aggregation!r}")
    nm = np.linalg.norm(wbar)
    if nm == 0:
        raise SchemeUndefinedError("aggregation direction vanished")
    wbar = wbar / nm

    g = H @ np.conj(wbar)  # g_k = wbar^H h_k up to conjugation of the scalar
    mag = np.abs(g)
    if np.any(mag == 0):
        raise SchemeUndefinedError("some device has zero gain along the aggregation direction")

    c = float(np.min(mag * np.sqrt(energy / params.alpha2)))
    if c == 0:
        raise SchemeUndefinedError("common amplitude collapsed to zero")

    b = c * np.conj(g) / (mag * mag)
    w = wbar / c
    mse = params.sigma2 / (c * c * K * K)

    # time-averaged downlink covariance; under own-slot accounting it upper
    # bounds each device's banked energy, so the stored solution still
    # certifies the energy constraints
    S = (params.P / K) * (hn.T @ hn.conj())
    S = 0.5 * (S + S.conj().T)

    solution = BeamformingSolution(S=S, w=w, b=b, b_tilde=np.abs(b))
    return SchemeResult(scheme="time_division", solution=solution, mse=mse)
