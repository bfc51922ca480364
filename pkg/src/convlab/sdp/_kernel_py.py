"""Pure numpy ADMM iterations; mirrors ``_admm_ext.pyx`` line for line."""

import math

import numpy as np

SQRT2 = math.sqrt(2.0)

MU_MIN, MU_MAX = 1e-6, 1e6
MU_FACTOR = 1.5
MU_RATIO = 3.0
MU_PATIENCE = 5


class _BlockView:
    __slots__ = ("off", "n", "kind", "size", "iu", "ju")

    def __init__(self, off, n, kind):
        self.off, self.n, self.kind = int(off), int(n), int(kind)
        self.iu, self.ju = np.triu_indices(self.n, 1)
        self.size = self.n * self.n if self.kind == 1 else self.n * (self.n + 1) // 2


def _views(meta):
    return [_BlockView(*row) for row in meta]


def _project_sym(v, bv):
    n, iu, ju = bv.n, bv.iu, bv.ju
    m = np.empty((n, n))
    idx = np.arange(n)
    m[idx, idx] = v[:n]
    m[iu, ju] = v[n:] / SQRT2
    m[ju, iu] = v[n:] / SQRT2
    w, q = np.linalg.eigh(m)
    pos = w > 0
    p = (q[:, pos] * w[pos]) @ q[:, pos].T
    return np.concatenate([np.diagonal(p), SQRT2 * p[iu, ju]])


def _project_herm(v, bv):
    n, iu, ju = bv.n, bv.iu, bv.ju
    npair = iu.size
    re = np.zeros((n, n))
    im = np.zeros((n, n))
    idx = np.arange(n)
    re[idx, idx] = v[:n]
    re[iu, ju] = v[n : n + npair] / SQRT2
    re[ju, iu] = re[iu, ju]
    im[iu, ju] = v[n + npair :] / SQRT2
    im[ju, iu] = -im[iu, ju]
    r = np.block([[re, -im], [im, re]])
    w, q = np.linalg.eigh(r)
    pos = w > 0
    p = (q[:, pos] * w[pos]) @ q[:, pos].T
    pre = 0.5 * (p[:n, :n] + p[n:, n:])
    pim = 0.5 * (p[n:, :n] - p[:n, n:])
    return np.concatenate([np.diagonal(pre), SQRT2 * pre[iu, ju], SQRT2 * pim[iu, ju]])


def project(v, views, out):
    for bv in views:
        seg = v[bv.off : bv.off + bv.size]
        if bv.kind == 2:
            out[bv.off] = seg[0] if seg[0] > 0 else 0.0
        elif bv.kind == 0:
            out[bv.off : bv.off + bv.size] = _project_sym(seg, bv)
        else:
            out[bv.off : bv.off + bv.size] = _project_herm(seg, bv)
    return out


def admm_run(A, P, b, c, x, s, y, meta, mu, rho, tol, max_iter, check_every):
    """Run up to ``max_iter`` dual-ADMM iterations in place on ``x, s, y``.

    Returns ``(iterations, mu, pinf, dinf, gap)``; stops early once all three
    relative residuals are below ``tol``.
    """
    views = _views(meta)
    nb = 1.0 + float(np.linalg.norm(b))
    nc = 1.0 + float(np.linalg.norm(c))
    pinf = dinf = gap = math.inf
    count_p = count_d = 0
    it = 0
    s_new = np.empty_like(s)
    while it < max_iter:
        it += 1
        r = A @ (c - s - mu * x) + mu * b
        y[:] = P @ r
        aty = A.T @ y
        v = c - aty - mu * x
        project(v, views, s_new)
        xhat = (s_new - v) / mu
        check = it % check_every == 0 or it == max_iter
        if check:
            dinf = float(np.linalg.norm(c - aty - s_new)) / nc
        x *= 1.0 - rho
        x += rho * xhat
        s[:] = s_new
        if check:
            pinf = float(np.linalg.norm(A @ x - b)) / nb
            pobj = float(c @ x)
            dobj = float(b @ y)
            gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
            if pinf <= tol and dinf <= tol and gap <= tol:
                break
            ratio = pinf / max(dinf, 1e-300)
            if ratio > MU_RATIO:
                count_p += 1
                count_d = 0
            elif ratio < 1.0 / MU_RATIO:
                count_d += 1
                count_p = 0
            else:
                count_p = count_d = 0
            if count_p >= MU_PATIENCE:
                mu = min(mu * MU_FACTOR, MU_MAX)
                count_p = 0
            elif count_d >= MU_PATIENCE:
                mu = max(mu / MU_FACTOR, MU_MIN)
                count_d = 0
    return it, mu, pinf, dinf, gap
