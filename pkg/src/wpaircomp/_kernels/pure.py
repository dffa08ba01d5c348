"""NumPy reference implementations of the two solver hot loops.

These are the fallback kernels; `wpaircomp._kernels._cy` implements the
same arithmetic in C. Both operate on pre-normalized data prepared by the
calling modules:

* `ellipsoid_dual_max` maximizes the concave dual
  g(mu, nu) = sum_k [(gamma_k b_k - 1)^2 + mu_k b_k^2] - nu,
  b_k = gamma_k / (gamma_k^2 + mu_k), over mu >= 0, nu >= 0 subject to
  nu I - sum_k mu_k hhat_k hhat_k^H >= 0, where `gram` holds the channel
  Gram matrix hhat_k^H hhat_j. The PSD constraint is evaluated through the
  K x K matrix C = diag(sqrt(mu)) gram diag(sqrt(mu)), whose spectrum
  matches the nonzero spectrum of sum_k mu_k hhat_k hhat_k^H.

* `dykstra_reduced` runs Dykstra's alternating projections for the
  covariance feasibility problem in the invariant subspace spanned by the
  channels: S = U A U^H + c (I - U U^H) for an orthonormal basis U, which
  reduces every projection to r x r work.
"""

import numpy as np

STATUS_RADIUS = 0
STATUS_GAP = 1
STATUS_MAXITER = 2
STATUS_DEGENERATE = 3


def ellipsoid_dual_max(
    gamma, gram, x0, radius, max_iter, radius_tol, gap_tol, record=None
):
    """Ellipsoid search over x = [mu; nu] with central cuts.

    Cut priority per iteration: most-negative coordinate (nonnegativity),
    then the PSD feasibility cut from the smallest eigenpair, else an
    objective supergradient cut.

    The shape matrix is propagated in square-root form, P = L L^T with the
    rank-one factor update L+ = sqrt(n^2/(n^2-1)) (L - s (L vhat) vhat^T),
    vhat = L^T g normalized and s = 1 - sqrt((n-1)/(n+1)); this is
    algebraically the standard ellipsoid update but keeps P positive
    definite by construction down to the ~1e-18 eigenvalue scale the
    stopping rule requires.

    Returns (best_x, best_val, status, iterations, obj_cuts, feas_cuts,
    nonneg_cuts, center, shape).
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    gram = np.asarray(gram, dtype=np.complex128)
    k = gamma.size
    n = k + 1
    g2 = gamma * gamma
    x = np.asarray(x0, dtype=np.float64).copy()
    ell = np.eye(n) * radius  # factor L with shape = L L^T
    grow = np.sqrt(n * n / (n * n - 1.0))
    s_down = 1.0 - np.sqrt((n - 1.0) / (n + 1.0))

    best_x = None
    best_val = -np.inf
    n_obj = n_feas = n_nonneg = 0
    status = STATUS_MAXITER
    restarts = 0
    it = 0

    for it in range(1, int(max_iter) + 1):
        stop_gap = False
        i_neg = int(np.argmin(x))
        if x[i_neg] < 0.0:
            g = np.zeros(n)
            g[i_neg] = -1.0
            n_nonneg += 1
            kind = "nonneg"
        else:
            mu = x[:k]
            smu = np.sqrt(mu)
            c = gram * np.outer(smu, smu)
            cw, cv = np.linalg.eigh(c)
            lam = float(cw[-1])
            if x[-1] - lam < 0.0:
                u = cv[:, -1]
                t = gram @ (smu * u)
                g = np.empty(n)
                # |delta^H hhat_k|^2 for the unit minimizing eigenvector
                # delta of nu I - sum mu hhat hhat^H; lam = ||Hhat(smu*u)||^2.
                g[:k] = (t.real * t.real + t.imag * t.imag) / lam
                g[-1] = -1.0
                n_feas += 1
                kind = "feas"
            else:
                b = gamma / (g2 + mu)
                r = gamma * b - 1.0
                val = float(np.sum(r * r + mu * b * b) - x[-1])
                if val > best_val:
                    best_val = val
                    best_x = x.copy()
                s = np.empty(n)
                s[:k] = b * b
                s[-1] = -1.0
                if gap_tol > 0.0:
                    bound = val + float(np.linalg.norm(ell.T @ s))
                    if bound - best_val <= gap_tol * (1.0 + abs(best_val)):
                        stop_gap = True
                g = -s
                n_obj += 1
                kind = "obj"

        if record is not None:
            record.append(
                {"x": x.copy(), "kind": kind, "g": g.copy(), "shape": ell @ ell.T}
            )
        if stop_gap:
            status = STATUS_GAP
            break

        fro2 = float(np.sum(ell * ell))
        v = ell.T @ g
        nv2 = float(v @ v)
        if not np.isfinite(nv2):
            status = STATUS_DEGENERATE
            break
        if nv2 <= 1e-28 * float(g @ g) * fro2:
            # the ellipsoid collapsed to a slab of zero float width along
            # the cut direction; restart with the bounding ball (radius =
            # largest semi-axis), which still contains the optimum
            smax = float(np.linalg.svd(ell, compute_uv=False)[0])
            lim = radius_tol * (1.0 + float(np.linalg.norm(x)))
            if smax < lim:
                status = STATUS_RADIUS
                break
            restarts += 1
            if restarts > 60:
                status = STATUS_DEGENERATE
                break
            ell = np.eye(n) * smax
            continue
        vhat = v / np.sqrt(nv2)
        lv = ell @ vhat  # equals (shape @ g) / sqrt(g' shape g)
        x = x - lv / (n + 1.0)
        ell = grow * (ell - s_down * np.outer(lv, vhat))

        # radius proxy sqrt(lambda_max(shape)) = largest singular value of
        # L; Frobenius bands avoid the SVD except near the threshold
        fro2 = float(np.sum(ell * ell))
        lim = radius_tol * (1.0 + float(np.linalg.norm(x)))
        lim2 = lim * lim
        if fro2 < lim2 or (
            fro2 < n * lim2
            and float(np.linalg.svd(ell, compute_uv=False)[0]) ** 2 < lim2
        ):
            status = STATUS_RADIUS
            break

    return (best_x, best_val, status, it, n_obj, n_feas, n_nonneg, x, ell @ ell.T)


STALL_WINDOW = 200
STALL_FACTOR = 0.995


def dykstra_reduced(hred, targets, power, m_full, start_coeff, max_epochs, tol):
    """Dykstra's alternating projections in reduced coordinates.

    State (A, c) represents S = U A U^H + c (I - U U^H); `hred` holds the
    reduced channels U^H h_k as columns. Cycle order per epoch: trace
    halfspace, the K energy halfspaces h_k^H S h_k >= targets[k], then the
    PSD cone, so the reported iterate is always exactly PSD.

    Stops early (not converged) when the best residual has not improved by
    one percent over the last STALL_WINDOW epochs, which is how slightly
    infeasible requirement vectors are detected without burning the whole
    epoch budget.

    Returns (A, c, epochs, converged, residual_history).
    """
    hred = np.asarray(hred, dtype=np.complex128)
    targets = np.asarray(targets, dtype=np.float64)
    r, kk = hred.shape
    mperp = m_full - r
    eye = np.eye(r)

    a = np.eye(r, dtype=np.complex128) * start_coeff
    c = float(start_coeff) if mperp > 0 else 0.0

    n_sets = kk + 2
    corr_a = np.zeros((n_sets, r, r), dtype=np.complex128)
    corr_c = np.zeros(n_sets)

    hn2 = np.sum(hred.real**2 + hred.imag**2, axis=0)
    hn4 = hn2 * hn2
    t_scale = max(float(targets.max(initial=0.0)), 0.0)
    denom = np.maximum(targets, 1e-12 * t_scale if t_scale > 0 else 1.0)

    resid_hist = np.empty(int(max_epochs))
    converged = False
    epochs = 0
    best_resid = np.inf
    best_epoch = 0

    for ep in range(int(max_epochs)):
        epochs = ep + 1

        # trace halfspace tr(S) <= power
        za = a + corr_a[0]
        zc = c + corr_c[0]
        t = float(np.trace(za).real) + zc * mperp
        if t > power:
            shift = (t - power) / m_full
            ya = za - shift * eye
            yc = zc - shift
        else:
            ya, yc = za, zc
        corr_a[0] = za - ya
        corr_c[0] = zc - yc
        a, c = ya, yc

        # energy halfspaces h_k^H S h_k >= targets[k]
        for j in range(kk):
            za = a + corr_a[1 + j]
            h = hred[:, j]
            e = float(np.real(np.vdot(h, za @ h)))
            if e < targets[j]:
                ya = za + ((targets[j] - e) / hn4[j]) * np.outer(h, h.conj())
            else:
                ya = za
            corr_a[1 + j] = za - ya
            a = ya

        # PSD cone (A >= 0 and c >= 0), done last so the iterate leaves
        # each epoch exactly positive semidefinite
        za = a + corr_a[kk + 1]
        zc = c + corr_c[kk + 1]
        za = 0.5 * (za + za.conj().T)
        w, v = np.linalg.eigh(za)
        if w[0] < 0.0:
            ya = (v * np.maximum(w, 0.0)) @ v.conj().T
            ya = 0.5 * (ya + ya.conj().T)
        else:
            ya = za
        yc = max(zc, 0.0) if mperp > 0 else zc
        corr_a[kk + 1] = za - ya
        corr_c[kk + 1] = zc - yc
        a, c = ya, yc

        en = np.real(np.einsum("ik,ij,jk->k", hred.conj(), a, hred))
        rel_en = float(np.max((targets - en) / denom, initial=0.0))
        tr_now = float(np.trace(a).real) + c * mperp
        rel_tr = max(tr_now - power, 0.0) / power
        resid = max(rel_en, rel_tr, 0.0)
        resid_hist[ep] = resid
        if resid <= tol:
            converged = True
            break
        if resid < best_resid * STALL_FACTOR:
            best_resid = resid
            best_epoch = ep
        elif ep - best_epoch >= STALL_WINDOW:
            break

    return a, c, epochs, converged, resid_hist[:epochs].copy()
