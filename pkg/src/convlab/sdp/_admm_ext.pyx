# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled dual-ADMM iterations; same arithmetic as ``_kernel_py.admm_run``."""

from libc.math cimport sqrt, fabs, INFINITY
from scipy.linalg.cython_blas cimport dgemv, ddot, dnrm2
from scipy.linalg.cython_lapack cimport dsyevd

import numpy as np

cdef double SQRT2 = 1.4142135623730951
cdef double MU_MIN = 1e-6
cdef double MU_MAX = 1e6
cdef double MU_FACTOR = 1.5
cdef double MU_RATIO = 3.0
cdef int MU_PATIENCE = 5


cdef struct Workspace:
    double* mat
    double* w
    double* work
    int* iwork
    int lwork
    int liwork


cdef int _eig(int nd, Workspace* ws) nogil:
    cdef char jobz = b'V'
    cdef char uplo = b'U'
    cdef int info = 0
    cdef int n = nd
    dsyevd(&jobz, &uplo, &n, ws.mat, &n, ws.w, ws.work, &ws.lwork, ws.iwork, &ws.liwork, &info)
    return info


cdef inline double _rank_sum(double* q, double* w, int nd, int i, int j, bint pos) nogil:
    # sum_k w_k q_k[i] q_k[j] over positive (pos) or negative eigenvalues; column k at q[k*nd]
    cdef double acc = 0.0
    cdef int k
    for k in range(nd):
        if (pos and w[k] > 0) or ((not pos) and w[k] < 0):
            acc += w[k] * q[k * nd + i] * q[k * nd + j]
    return acc


cdef int _project_sym(double* v, double* out, int n, Workspace* ws) nogil:
    cdef int i, j, p, npos = 0
    cdef double val
    cdef bint use_pos
    for i in range(n):
        ws.mat[i * n + i] = v[i]
    p = n
    for i in range(n):
        for j in range(i + 1, n):
            val = v[p] / SQRT2
            ws.mat[i * n + j] = val
            ws.mat[j * n + i] = val
            p += 1
    if _eig(n, ws) != 0:
        return -1
    for i in range(n):
        if ws.w[i] > 0:
            npos += 1
    use_pos = 2 * npos <= n
    for i in range(n):
        if use_pos:
            out[i] = _rank_sum(ws.mat, ws.w, n, i, i, True)
        else:
            out[i] = v[i] - _rank_sum(ws.mat, ws.w, n, i, i, False)
    p = n
    for i in range(n):
        for j in range(i + 1, n):
            if use_pos:
                out[p] = SQRT2 * _rank_sum(ws.mat, ws.w, n, i, j, True)
            else:
                out[p] = v[p] - SQRT2 * _rank_sum(ws.mat, ws.w, n, i, j, False)
            p += 1
    return 0


cdef int _project_herm(double* v, double* out, int n, Workspace* ws) nogil:
    cdef int nd = 2 * n
    cdef int i, j, p, npair, npos = 0
    cdef double re, im, pre, pim
    cdef bint use_pos
    npair = n * (n - 1) // 2
    for i in range(nd * nd):
        ws.mat[i] = 0.0
    for i in range(n):
        ws.mat[i * nd + i] = v[i]
        ws.mat[(n + i) * nd + n + i] = v[i]
    p = 0
    for i in range(n):
        for j in range(i + 1, n):
            re = v[n + p] / SQRT2
            im = v[n + npair + p] / SQRT2
            # [[Re, -Im], [Im, Re]]
            ws.mat[i * nd + j] = re
            ws.mat[j * nd + i] = re
            ws.mat[(n + i) * nd + n + j] = re
            ws.mat[(n + j) * nd + n + i] = re
            ws.mat[i * nd + n + j] = -im
            ws.mat[(n + j) * nd + i] = -im
            ws.mat[(n + i) * nd + j] = im
            ws.mat[j * nd + n + i] = im
            p += 1
    if _eig(nd, ws) != 0:
        return -1
    for i in range(nd):
        if ws.w[i] > 0:
            npos += 1
    use_pos = 2 * npos <= nd
    for i in range(n):
        pre = 0.5 * (_rank_sum(ws.mat, ws.w, nd, i, i, use_pos) + _rank_sum(ws.mat, ws.w, nd, n + i, n + i, use_pos))
        out[i] = pre if use_pos else v[i] - pre
    p = 0
    for i in range(n):
        for j in range(i + 1, n):
            pre = 0.5 * (_rank_sum(ws.mat, ws.w, nd, i, j, use_pos) + _rank_sum(ws.mat, ws.w, nd, n + i, n + j, use_pos))
            pim = 0.5 * (_rank_sum(ws.mat, ws.w, nd, n + i, j, use_pos) - _rank_sum(ws.mat, ws.w, nd, i, n + j, use_pos))
            if use_pos:
                out[n + p] = SQRT2 * pre
                out[n + npair + p] = SQRT2 * pim
            else:
                out[n + p] = v[n + p] - SQRT2 * pre
                out[n + npair + p] = v[n + npair + p] - SQRT2 * pim
            p += 1
    return 0


cdef int _project_all(double* v, double* out, long[:, ::1] meta, Workspace* ws) nogil:
    cdef Py_ssize_t k
    cdef long off, n, kind
    for k in range(meta.shape[0]):
        off = meta[k, 0]
        n = meta[k, 1]
        kind = meta[k, 2]
        if kind == 2:
            out[off] = v[off] if v[off] > 0 else 0.0
        elif kind == 0:
            if _project_sym(v + off, out + off, <int>n, ws) != 0:
                return -1
        else:
            if _project_herm(v + off, out + off, <int>n, ws) != 0:
                return -1
    return 0


def project(double[::1] v, long[:, ::1] meta):
    """PSD projection of every block (exposed for tests)."""
    out = np.zeros(v.shape[0])
    cdef double[::1] o = out
    cdef Workspace ws
    buf = _alloc(meta)
    _fill(&ws, buf)
    if _project_all(&v[0], &o[0], meta, &ws) != 0:
        raise np.linalg.LinAlgError("eigendecomposition failed")
    return out


def _alloc(long[:, ::1] meta):
    cdef Py_ssize_t k
    cdef int nd = 1
    cdef int m
    for k in range(meta.shape[0]):
        m = <int>meta[k, 1] * (2 if meta[k, 2] == 1 else 1)
        if m > nd:
            nd = m
    lwork = 1 + 6 * nd + 2 * nd * nd
    liwork = 3 + 5 * nd
    return (np.zeros(nd * nd), np.zeros(nd), np.zeros(lwork), np.zeros(liwork, dtype=np.intc))


cdef void _fill(Workspace* ws, tuple buf):
    cdef double[::1] mat = buf[0]
    cdef double[::1] w = buf[1]
    cdef double[::1] work = buf[2]
    cdef int[::1] iwork = buf[3]
    ws.mat = &mat[0]
    ws.w = &w[0]
    ws.work = &work[0]
    ws.iwork = &iwork[0]
    ws.lwork = <int>work.shape[0]
    ws.liwork = <int>iwork.shape[0]


def admm_run(double[:, ::1] A, double[:, ::1] P, double[::1] b, double[::1] c,
             double[::1] x, double[::1] s, double[::1] y, long[:, ::1] meta,
             double mu, double rho, double tol, int max_iter, int check_every):
    """Run up to ``max_iter`` iterations in place; returns ``(it, mu, pinf, dinf, gap)``."""
    cdef int m = <int>A.shape[0]
    cdef int n = <int>A.shape[1]
    cdef int one = 1
    cdef double d_one = 1.0, d_zero = 0.0
    cdef char trans_t = b'T'
    cdef char trans_n = b'N'
    cdef int it = 0, i, count_p = 0, count_d = 0
    cdef double pinf = INFINITY, dinf = INFINITY, gap = INFINITY
    cdef double nb, nc, acc, pobj, dobj, ratio, xh
    cdef bint check

    tmp_a = np.zeros(n)
    aty_a = np.zeros(n)
    v_a = np.zeros(n)
    snew_a = np.zeros(n)
    r_a = np.zeros(max(m, 1))
    ax_a = np.zeros(max(m, 1))
    cdef double[::1] tmp = tmp_a
    cdef double[::1] aty = aty_a
    cdef double[::1] v = v_a
    cdef double[::1] snew = snew_a
    cdef double[::1] r = r_a
    cdef double[::1] ax = ax_a
    cdef Workspace ws
    buf = _alloc(meta)
    _fill(&ws, buf)

    nb = 1.0 + (dnrm2(&m, &b[0], &one) if m > 0 else 0.0)
    nc = 1.0 + dnrm2(&n, &c[0], &one)

    with nogil:
        while it < max_iter:
            it += 1
            for i in range(n):
                tmp[i] = c[i] - s[i] - mu * x[i]
            if m > 0:
                # r = A tmp + mu b ; y = P r
                dgemv(&trans_t, &n, &m, &d_one, &A[0, 0], &n, &tmp[0], &one, &d_zero, &r[0], &one)
                for i in range(m):
                    r[i] += mu * b[i]
                dgemv(&trans_n, &m, &m, &d_one, &P[0, 0], &m, &r[0], &one, &d_zero, &y[0], &one)
                dgemv(&trans_n, &n, &m, &d_one, &A[0, 0], &n, &y[0], &one, &d_zero, &aty[0], &one)
            else:
                for i in range(n):
                    aty[i] = 0.0
            for i in range(n):
                v[i] = c[i] - aty[i] - mu * x[i]
            if _project_all(&v[0], &snew[0], meta, &ws) != 0:
                with gil:
                    raise np.linalg.LinAlgError("eigendecomposition failed")
            check = (it % check_every == 0) or (it == max_iter)
            if check:
                acc = 0.0
                for i in range(n):
                    xh = c[i] - aty[i] - snew[i]
                    acc += xh * xh
                dinf = sqrt(acc) / nc
            for i in range(n):
                xh = (snew[i] - v[i]) / mu
                x[i] = (1.0 - rho) * x[i] + rho * xh
                s[i] = snew[i]
            if check:
                if m > 0:
                    dgemv(&trans_t, &n, &m, &d_one, &A[0, 0], &n, &x[0], &one, &d_zero, &ax[0], &one)
                    acc = 0.0
                    for i in range(m):
                        acc += (ax[i] - b[i]) * (ax[i] - b[i])
                    pinf = sqrt(acc) / nb
                    dobj = ddot(&m, &b[0], &one, &y[0], &one)
                else:
                    pinf = 0.0
                    dobj = 0.0
                pobj = ddot(&n, &c[0], &one, &x[0], &one)
                gap = fabs(pobj - dobj) / (1.0 + fabs(pobj) + fabs(dobj))
                if pinf <= tol and dinf <= tol and gap <= tol:
                    break
                ratio = pinf / (dinf if dinf > 1e-300 else 1e-300)
                if ratio > MU_RATIO:
                    count_p += 1
                    count_d = 0
                elif ratio < 1.0 / MU_RATIO:
                    count_d += 1
                    count_p = 0
                else:
                    count_p = 0
                    count_d = 0
                if count_p >= MU_PATIENCE:
                    mu = mu * MU_FACTOR
                    if mu > MU_MAX:
                        mu = MU_MAX
                    count_p = 0
                elif count_d >= MU_PATIENCE:
                    mu = mu / MU_FACTOR
                    if mu < MU_MIN:
                        mu = MU_MIN
                    count_d = 0
    return it, mu, pinf, dinf, gap
