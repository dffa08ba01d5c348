"""System parameters, Rician channel generation, and harvested-power evaluation.

Conventions: all powers in watts, gains linear, distances in meters.
Channels are stored as a (K, M) array whose row k is the length-M vector
h_k between the access point and device k.
"""

from dataclasses import dataclass, field

import numpy as np

from .hermitian import max_abs, require_hermitian


class NumericalError(RuntimeError):
    """A quantity that must be real came out materially complex."""


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass
class SystemParams:
    """Scalar configuration of the access point / device population."""

    M: int
    K: int
    P: float
    sigma2: float
    eta: float = 0.8
    alpha1: float = 0.5
    alpha2: float = 0.5

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K}")
        self.M = int(self.M)
        self.K = int(self.K)
        if not self.P > 0:
            raise ValueError(f"P must be positive, got {self.P}")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        for name in ("alpha1", "alpha2"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if abs(self.alpha1 + self.alpha2 - 1.0) > 1e-12:
            raise ValueError(
                f"slot fractions must sum to 1, got {self.alpha1 + self.alpha2}"
            )


@dataclass
class PathLossModel:
    """Distance-power law L(d) = k0 * (d / d0) ** -alpha0, all linear units."""

    k0: float = 1e-3
    d0: float = 1.0
    alpha0: float = 3.0

    def __post_init__(self):
        if not self.k0 > 0:
            raise ValueError(f"k0 must be positive, got {self.k0}")
        if not self.d0 > 0:
            raise ValueError(f"d0 must be positive, got {self.d0}")
        if not self.alpha0 >= 2:
            raise ValueError(f"alpha0 must be >= 2, got {self.alpha0}")


@dataclass
class ChannelSet:
    """One realization of the K downlink/uplink channel vectors."""

    H: np.ndarray
    distances: np.ndarray
    rician_kappa: float = 0.0

    def __post_init__(self):
        self.H = np.ascontiguousarray(self.H, dtype=np.complex128)
        if self.H.ndim != 2:
            raise ValueError(f"H must be a (K, M) array, got shape {self.H.shape}")
        self.distances = np.atleast_1d(np.asarray(self.distances, dtype=float))
        if self.distances.shape != (self.H.shape[0],):
            raise ValueError("distances must have one entry per device")
        if not np.all(np.isfinite(self.H)):
            raise ValueError("channel vectors must be finite")
        if np.any(np.linalg.norm(self.H, axis=1) == 0.0):
            raise ValueError("every channel vector must be nonzero")
        if np.any(self.distances <= 0):
            raise ValueError("distances must be positive")
        if self.rician_kappa < 0:
            raise ValueError("rician_kappa must be nonnegative")

    @property
    def K(self):
        return self.H.shape[0]

    @property
    def M(self):
        return self.H.shape[1]


def path_loss(model, d):
    """Linear channel power gain at distance d (meters)."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = model.k0 * (d / model.d0) ** (-model.alpha0)
    return float(out) if out.ndim == 0 else out


def sample_channels(params, model, distances, kappa, seed):
    """Draw one Rician channel realization.

    h_k = sqrt(L(d_k)) * (sqrt(kappa/(kappa+1)) * a + sqrt(1/(kappa+1)) * g_k)
    with `a` the deterministic all-ones length-M vector and g_k standard
    circularly-symmetric complex Gaussian. The same seed reproduces the
    realization bit for bit; parallel sweeps should hand each trial its own
    numpy SeedSequence spawn key.
    """
    distances = np.broadcast_to(
        np.atleast_1d(np.asarray(distances, dtype=float)), (params.K,)
    ).copy()
    if np.any(distances <= 0):
        raise ValueError("distances must be positive")
    if kappa < 0:
        raise ValueError("rician factor must be nonnegative")
    rng = np.random.default_rng(seed)
    gains = path_loss(model, distances)
    scatter = rng.standard_normal((params.K, params.M))
    scatter = scatter + 1j * rng.standard_normal((params.K, params.M))
    scatter *= np.sqrt(0.5)
    los = np.ones(params.M)
    mix = np.sqrt(kappa / (kappa + 1.0)) * los + np.sqrt(1.0 / (kappa + 1.0)) * scatter
    H = np.sqrt(gains)[:, None] * mix
    return ChannelSet(H=H, distances=distances, rician_kappa=float(kappa))


def harvested_power(S, h, eta):
    """Power collected by a device with channel h under transmit covariance S.

    Returns eta * h^H S h as a float; the quadratic form must be real up to
    rounding, otherwise NumericalError is raised.
    """
    S = require_hermitian(S)
    h = np.asarray(h, dtype=np.complex128)
    q = complex(np.vdot(h, S @ h))
    if abs(q.imag) > 1e-9 * (1.0 + abs(q.real) + max_abs(S)):
        raise NumericalError(
            f"quadratic form h^H S h is materially complex: {q!r}"
        )
    return float(eta) * q.real
