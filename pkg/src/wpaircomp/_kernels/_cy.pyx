# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of the NumPy kernels in `pure.py`.

Same call signatures, same arithmetic, same stopping rules; the only
difference is that the per-iteration work (weighted-Gram eigenpairs,
rank-one ellipsoid factor updates, Dykstra projection sweeps) runs as
straight C loops over LAPACK calls instead of NumPy expressions.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt
from scipy.linalg.cython_lapack cimport dsyevd, zheevd

cnp.import_array()

STATUS_RADIUS = 0
STATUS_GAP = 1
STATUS_MAXITER = 2
STATUS_DEGENERATE = 3

DEF STALL_WINDOW = 200
DEF STALL_FACTOR = 0.995


cdef class _ZheevdWork:
    """Workspace for repeated Hermitian eigendecompositions of one size."""

    cdef Py_ssize_t n
    cdef cnp.ndarray a, w, work, rwork, iwork
    cdef int lwork, lrwork, liwork

    def __init__(self, Py_ssize_t n):
        cdef int info = 0, nn = <int> n, lwq = -1
        cdef double complex wq
        cdef double rwq
        cdef int iwq
        self.n = n
        self.a = np.empty(n * n, dtype=np.complex128)
        self.w = np.empty(n, dtype=np.float64)
        zheevd(b"V", b"L", &nn, <double complex*> cnp.PyArray_DATA(self.a), &nn,
               <double*> cnp.PyArray_DATA(self.w), &wq, &lwq, &rwq, &lwq,
               &iwq, &lwq, &info)
        self.lwork = <int> wq.real
        self.lrwork = <int> rwq
        self.liwork = iwq
        self.work = np.empty(self.lwork, dtype=np.complex128)
        self.rwork = np.empty(self.lrwork, dtype=np.float64)
        self.iwork = np.empty(self.liwork, dtype=np.int32)

    cdef int decompose(self) nogil except -1:
        """Eigendecompose the column-major Hermitian matrix staged in `a`;
        eigenvalues ascend in `w`, eigenvector j lands in column j."""
        cdef int info = 0, nn = <int> self.n
        with gil:
            pass
        zheevd(b"V", b"L", &nn, <double complex*> cnp.PyArray_DATA(self.a), &nn,
               <double*> cnp.PyArray_DATA(self.w),
               <double complex*> cnp.PyArray_DATA(self.work), &self.lwork,
               <double*> cnp.PyArray_DATA(self.rwork), &self.lrwork,
               <int*> cnp.PyArray_DATA(self.iwork), &self.liwork, &info)
        return info


cdef double _sym_lambda_max(double[:, ::1] ell, Py_ssize_t n,
                            double* abuf, double* wbuf,
                            double* work, int lwork,
                            int* iwork, int liwork) nogil:
    """Largest eigenvalue of L L^T (= squared largest singular value of L)."""
    cdef Py_ssize_t i, j, l
    cdef double acc
    cdef int info = 0, nn = <int> n
    for j in range(n):
        for i in range(n):
            acc = 0.0
            for l in range(n):
                acc += ell[i, l] * ell[j, l]
            abuf[i + j * n] = acc
    dsyevd(b"N", b"L", &nn, abuf, &nn, wbuf, work, &lwork, iwork, &liwork, &info)
    if info != 0:
        return -1.0
    return wbuf[n - 1]


def ellipsoid_dual_max(object gamma_in, object gram_in, object x0_in,
                       double radius, long max_iter, double radius_tol,
                       double gap_tol, record=None):
    """Compiled ellipsoid search; see the pure twin for the semantics."""
    if record is not None:
        raise ValueError("iteration recording requires the pure backend")

    cdef cnp.ndarray[cnp.float64_t, ndim=1] gamma = \
        np.ascontiguousarray(gamma_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] gram = \
        np.ascontiguousarray(gram_in, dtype=np.complex128)
    cdef Py_ssize_t k = gamma.shape[0]
    cdef Py_ssize_t n = k + 1

    cdef cnp.ndarray[cnp.float64_t, ndim=1] x_arr = \
        np.array(x0_in, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ell_arr = \
        np.eye(n, dtype=np.float64) * radius
    cdef cnp.ndarray[cnp.float64_t, ndim=1] best_arr = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g_arr = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v_arr = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lv_arr = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] smu_arr = np.zeros(k, dtype=np.float64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] t_arr = np.zeros(k, dtype=np.complex128)

    cdef double[::1] x = x_arr
    cdef double[:, ::1] ell = ell_arr
    cdef double[::1] best_x = best_arr
    cdef double[::1] g = g_arr
    cdef double[::1] v = v_arr
    cdef double[::1] lv = lv_arr
    cdef double[::1] smu = smu_arr
    cdef double complex[::1] tvec = t_arr
    cdef double[::1] gam = gamma
    cdef double complex[:, ::1] gr = gram

    cdef _ZheevdWork eig = _ZheevdWork(k)
    cdef double complex* cmat = <double complex*> cnp.PyArray_DATA(eig.a)
    cdef double* cw = <double*> cnp.PyArray_DATA(eig.w)

    # real symmetric workspace for the lambda_max stopping check
    cdef cnp.ndarray sa = np.empty(n * n, dtype=np.float64)
    cdef cnp.ndarray sw = np.empty(n, dtype=np.float64)
    cdef int s_lwork = <int> max(1, 1 + 6 * n + 2 * n * n + 16)
    cdef int s_liwork = <int> (3 + 5 * n + 8)
    cdef cnp.ndarray swork = np.empty(s_lwork, dtype=np.float64)
    cdef cnp.ndarray siwork = np.empty(s_liwork, dtype=np.int32)

    cdef double grow = sqrt(n * n / (n * n - 1.0))
    cdef double s_down = 1.0 - sqrt((n - 1.0) / (n + 1.0))

    cdef bint have_best = False
    cdef double best_val = -1e308
    cdef long n_obj = 0, n_feas = 0, n_nonneg = 0
    cdef int status = STATUS_MAXITER
    cdef long it = 0, restarts = 0
    cdef bint stop_gap

    cdef Py_ssize_t i, j, l, i_neg
    cdef double xmin, lam, val, b, r, acc, mu_i
    cdef double nv2, fro2, lim, lim2, gnorm2, bound, smax2
    cdef double complex ct

    cdef long iter_count = 0
    while iter_count < max_iter:
        iter_count += 1
        it = iter_count
        stop_gap = False

        i_neg = 0
        xmin = x[0]
        for i in range(1, n):
            if x[i] < xmin:
                xmin = x[i]
                i_neg = i
        if xmin < 0.0:
            for i in range(n):
                g[i] = 0.0
            g[i_neg] = -1.0
            n_nonneg += 1
        else:
            for i in range(k):
                smu[i] = sqrt(x[i])
            # column-major weighted Gram C = D^1/2 gram D^1/2
            for j in range(k):
                for i in range(k):
                    cmat[i + j * k] = gr[i, j] * (smu[i] * smu[j])
            if eig.decompose() != 0:
                status = STATUS_DEGENERATE
                break
            lam = cw[k - 1]
            if x[n - 1] - lam < 0.0:
                # PSD feasibility cut from the top eigenvector of C
                for i in range(k):
                    ct = 0
                    for j in range(k):
                        ct = ct + gr[i, j] * (smu[j] * cmat[j + (k - 1) * k])
                    tvec[i] = ct
                for i in range(k):
                    g[i] = (tvec[i].real * tvec[i].real
                            + tvec[i].imag * tvec[i].imag) / lam
                g[n - 1] = -1.0
                n_feas += 1
            else:
                val = 0.0
                for i in range(k):
                    mu_i = x[i]
                    b = gam[i] / (gam[i] * gam[i] + mu_i)
                    r = gam[i] * b - 1.0
                    val += r * r + mu_i * b * b
                    g[i] = b * b  # supergradient entries (negated below)
                val -= x[n - 1]
                g[n - 1] = -1.0
                if val > best_val:
                    best_val = val
                    have_best = True
                    for i in range(n):
                        best_x[i] = x[i]
                if gap_tol > 0.0:
                    acc = 0.0
                    for j in range(n):
                        r = 0.0
                        for i in range(n):
                            r += ell[i, j] * g[i]
                        acc += r * r
                    bound = val + sqrt(acc)
                    if bound - best_val <= gap_tol * (1.0 + fabs(best_val)):
                        stop_gap = True
                for i in range(n):
                    g[i] = -g[i]
                n_obj += 1

        if stop_gap:
            status = STATUS_GAP
            break

        fro2 = 0.0
        for i in range(n):
            for j in range(n):
                fro2 += ell[i, j] * ell[i, j]
        nv2 = 0.0
        gnorm2 = 0.0
        for j in range(n):
            acc = 0.0
            for i in range(n):
                acc += ell[i, j] * g[i]
            v[j] = acc
            nv2 += acc * acc
        for i in range(n):
            gnorm2 += g[i] * g[i]
        if not (nv2 == nv2) or nv2 == float("inf"):
            status = STATUS_DEGENERATE
            break
        if nv2 <= 1e-28 * gnorm2 * fro2:
            # zero float width along the cut: restart with the bounding ball
            smax2 = _sym_lambda_max(
                ell, n, <double*> cnp.PyArray_DATA(sa),
                <double*> cnp.PyArray_DATA(sw),
                <double*> cnp.PyArray_DATA(swork), s_lwork,
                <int*> cnp.PyArray_DATA(siwork), s_liwork)
            acc = 0.0
            for i in range(n):
                acc += x[i] * x[i]
            lim = radius_tol * (1.0 + sqrt(acc))
            if smax2 >= 0.0 and sqrt(smax2) < lim:
                status = STATUS_RADIUS
                break
            restarts += 1
            if restarts > 60 or smax2 < 0.0:
                status = STATUS_DEGENERATE
                break
            for i in range(n):
                for j in range(n):
                    ell[i, j] = 0.0
                ell[i, i] = sqrt(smax2)
            continue

        acc = 1.0 / sqrt(nv2)
        for j in range(n):
            v[j] *= acc
        for i in range(n):
            r = 0.0
            for j in range(n):
                r += ell[i, j] * v[j]
            lv[i] = r
        for i in range(n):
            x[i] -= lv[i] / (n + 1.0)
        for i in range(n):
            for j in range(n):
                ell[i, j] = grow * (ell[i, j] - s_down * lv[i] * v[j])

        fro2 = 0.0
        for i in range(n):
            for j in range(n):
                fro2 += ell[i, j] * ell[i, j]
        acc = 0.0
        for i in range(n):
            acc += x[i] * x[i]
        lim = radius_tol * (1.0 + sqrt(acc))
        lim2 = lim * lim
        if fro2 < lim2:
            status = STATUS_RADIUS
            break
        if fro2 < n * lim2:
            smax2 = _sym_lambda_max(
                ell, n, <double*> cnp.PyArray_DATA(sa),
                <double*> cnp.PyArray_DATA(sw),
                <double*> cnp.PyArray_DATA(swork), s_lwork,
                <int*> cnp.PyArray_DATA(siwork), s_liwork)
            if 0.0 <= smax2 < lim2:
                status = STATUS_RADIUS
                break

    shape = ell_arr @ ell_arr.T
    best_out = best_arr.copy() if have_best else None
    return (best_out, best_val if have_best else -np.inf, status, int(it),
            int(n_obj), int(n_feas), int(n_nonneg), x_arr.copy(), shape)


def dykstra_reduced(object hred_in, object targets_in, double power,
                    long m_full, double start_coeff, long max_epochs,
                    double tol):
    """Compiled Dykstra sweep in reduced coordinates; see the pure twin."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] hred = \
        np.ascontiguousarray(hred_in, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] targets = \
        np.ascontiguousarray(targets_in, dtype=np.float64)
    cdef Py_ssize_t r = hred.shape[0]
    cdef Py_ssize_t kk = hred.shape[1]
    cdef Py_ssize_t mperp = m_full - r
    cdef Py_ssize_t n_sets = kk + 2

    cdef cnp.ndarray[cnp.complex128_t, ndim=2] a_arr = \
        np.eye(r, dtype=np.complex128) * start_coeff
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] corr_arr = \
        np.zeros((n_sets, r, r), dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] corr_c_arr = np.zeros(n_sets)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] hn4_arr = np.zeros(kk)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] denom_arr = np.zeros(kk)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] hist_arr = np.empty(max_epochs)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] z_arr = \
        np.zeros((r, r), dtype=np.complex128)

    cdef double complex[:, ::1] a = a_arr
    cdef double complex[:, :, ::1] corr = corr_arr
    cdef double[::1] corr_c = corr_c_arr
    cdef double complex[:, ::1] hm = hred
    cdef double[::1] tg = targets
    cdef double[::1] hn4 = hn4_arr
    cdef double[::1] denom = denom_arr
    cdef double[::1] hist = hist_arr
    cdef double complex[:, ::1] z = z_arr

    cdef double c = start_coeff if mperp > 0 else 0.0

    cdef _ZheevdWork eig = _ZheevdWork(r)
    cdef double complex* abuf = <double complex*> cnp.PyArray_DATA(eig.a)
    cdef double* wbuf = <double*> cnp.PyArray_DATA(eig.w)

    cdef Py_ssize_t i, j, l, ep, jj
    cdef double t_scale = 0.0, acc, e, shift, resid, rel_en, rel_tr, zc, yc
    cdef double best_resid = 1e308
    cdef long best_epoch = 0
    cdef double complex cacc
    cdef bint converged = False
    cdef long epochs = 0

    for j in range(kk):
        acc = 0.0
        for i in range(r):
            acc += hm[i, j].real * hm[i, j].real + hm[i, j].imag * hm[i, j].imag
        hn4[j] = acc * acc
        if tg[j] > t_scale:
            t_scale = tg[j]
    for j in range(kk):
        if t_scale > 0.0:
            denom[j] = tg[j] if tg[j] > 1e-12 * t_scale else 1e-12 * t_scale
        else:
            denom[j] = 1.0

    for ep in range(max_epochs):
        epochs = ep + 1

        # trace halfspace tr(S) <= power
        for i in range(r):
            for j in range(r):
                z[i, j] = a[i, j] + corr[0, i, j]
        zc = c + corr_c[0]
        acc = 0.0
        for i in range(r):
            acc += z[i, i].real
        acc += zc * mperp
        if acc > power:
            shift = (acc - power) / m_full
            for i in range(r):
                corr[0, i, i] = shift
                for j in range(r):
                    if i != j:
                        corr[0, i, j] = 0
                a[i, i] = z[i, i] - shift
                for j in range(r):
                    if i != j:
                        a[i, j] = z[i, j]
            corr_c[0] = shift
            yc = zc - shift
        else:
            for i in range(r):
                for j in range(r):
                    corr[0, i, j] = 0
                    a[i, j] = z[i, j]
            corr_c[0] = 0.0
            yc = zc
        c = yc

        # energy halfspaces h_j^H S h_j >= targets[j]
        for jj in range(kk):
            for i in range(r):
                for j in range(r):
                    z[i, j] = a[i, j] + corr[1 + jj, i, j]
            e = 0.0
            for i in range(r):
                cacc = 0
                for j in range(r):
                    cacc = cacc + z[i, j] * hm[j, jj]
                e += (hm[i, jj].conjugate() * cacc).real
            if e < tg[jj]:
                shift = (tg[jj] - e) / hn4[jj]
                for i in range(r):
                    for j in range(r):
                        cacc = shift * hm[i, jj] * hm[j, jj].conjugate()
                        a[i, j] = z[i, j] + cacc
                        corr[1 + jj, i, j] = -cacc
            else:
                for i in range(r):
                    for j in range(r):
                        a[i, j] = z[i, j]
                        corr[1 + jj, i, j] = 0

        # PSD cone last, so the epoch output is exactly PSD
        for i in range(r):
            for j in range(r):
                z[i, j] = a[i, j] + corr[kk + 1, i, j]
        for j in range(r):
            for i in range(r):
                abuf[i + j * r] = 0.5 * (z[i, j] + z[j, i].conjugate())
        if eig.decompose() != 0:
            break
        if wbuf[0] < 0.0:
            for i in range(r):
                for j in range(r):
                    cacc = 0
                    for l in range(r):
                        if wbuf[l] > 0.0:
                            cacc = cacc + wbuf[l] * abuf[i + l * r] * \
                                abuf[j + l * r].conjugate()
                    a[i, j] = cacc
            for i in range(r):
                for j in range(i + 1, r):
                    cacc = 0.5 * (a[i, j] + a[j, i].conjugate())
                    a[i, j] = cacc
                    a[j, i] = cacc.conjugate()
                a[i, i] = a[i, i].real
        else:
            for i in range(r):
                for j in range(r):
                    a[i, j] = z[i, j]
        for i in range(r):
            for j in range(r):
                corr[kk + 1, i, j] = z[i, j] - a[i, j]
        zc = c + corr_c[kk + 1]
        if mperp > 0:
            yc = zc if zc > 0.0 else 0.0
        else:
            yc = zc
        corr_c[kk + 1] = zc - yc
        c = yc

        # residuals relative to target magnitudes
        rel_en = 0.0
        for jj in range(kk):
            e = 0.0
            for i in range(r):
                cacc = 0
                for j in range(r):
                    cacc = cacc + a[i, j] * hm[j, jj]
                e += (hm[i, jj].conjugate() * cacc).real
            acc = (tg[jj] - e) / denom[jj]
            if acc > rel_en:
                rel_en = acc
        acc = 0.0
        for i in range(r):
            acc += a[i, i].real
        acc += c * mperp
        rel_tr = (acc - power) / power
        if rel_tr < 0.0:
            rel_tr = 0.0
        resid = rel_en if rel_en > rel_tr else rel_tr
        if resid < 0.0:
            resid = 0.0
        hist[ep] = resid
        if resid <= tol:
            converged = True
            break
        if resid < best_resid * STALL_FACTOR:
            best_resid = resid
            best_epoch = ep
        elif ep - best_epoch >= STALL_WINDOW:
            break

    return (a_arr, float(c), int(epochs), bool(converged),
            hist_arr[:epochs].copy())
