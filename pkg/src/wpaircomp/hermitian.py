"""Complex Hermitian linear-algebra kernel shared by the solver modules.

All operations are pure functions on ndarray inputs and validate the
Hermitian structure before touching LAPACK, so downstream solvers can rely
on real eigenvalues and orthonormal eigenvectors without re-checking.
"""

import numpy as np
import scipy.linalg

HERMITIAN_RTOL = 1e-12


class NotHermitianError(ValueError):
    """Input matrix is not Hermitian within tolerance."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Matrix passed to the HPD solver is singular or indefinite."""


def max_abs(a):
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def require_hermitian(a, rtol=HERMITIAN_RTOL):
    """Return `a` as a complex128 array, rejecting non-Hermitian input."""
    a = np.ascontiguousarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise NotHermitianError("matrix has non-finite entries")
    tol = rtol * (1.0 + max_abs(a))
    dev = max_abs(a - a.conj().T)
    if dev > tol:
        raise NotHermitianError(
            f"matrix deviates from A == A^H by {dev:.3e} (tolerance {tol:.3e})"
        )
    return a


def hermitian_eig(a):
    """Eigendecomposition of a Hermitian matrix.

    Returns (w, V): real eigenvalues in ascending order and orthonormal
    eigenvector columns with A @ V[:, i] == w[i] * V[:, i].
    """
    a = require_hermitian(a)
    return np.linalg.eigh(a)


def min_eigpair(a):
    """Smallest eigenvalue of a Hermitian matrix and one unit eigenvector."""
    w, v = hermitian_eig(a)
    return float(w[0]), v[:, 0]


def project_psd(a):
    """Frobenius-nearest positive semidefinite matrix.

    Clips negative eigenvalues at zero and keeps eigenvectors, which is the
    unique Frobenius projection onto the PSD cone. PSD input is returned
    unchanged.
    """
    w, v = hermitian_eig(a)
    if w[0] >= 0.0:
        return np.ascontiguousarray(a, dtype=np.complex128)
    s = (v * np.maximum(w, 0.0)) @ v.conj().T
    return 0.5 * (s + s.conj().T)


def solve_hpd(a, rhs):
    """Solve A x = rhs for Hermitian positive definite A via Cholesky.

    One step of iterative refinement keeps the relative residual near
    machine precision even for ill-conditioned systems. Raises
    NotPositiveDefiniteError when the factorization fails, so callers can
    decide on a fallback.
    """
    a = require_hermitian(a)
    rhs = np.asarray(rhs, dtype=np.complex128)
    try:
        cf = scipy.linalg.cho_factor(a, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from None
    x = scipy.linalg.cho_solve(cf, rhs, check_finite=False)
    x = x + scipy.linalg.cho_solve(cf, rhs - a @ x, check_finite=False)
    return x
