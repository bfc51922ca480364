"""Dense primal-dual interior-point method (Nesterov-Todd direction, Mehrotra corrector).

Used as a fallback when the ADMM iterations reach their budget without
meeting the tolerance, which happens on degenerate programmes (rank-deficient
data, optimal faces without strict complementarity). It works on the same
normalised standard form ``min c.x  s.t.  A x = b, x in K`` as the ADMM
kernels.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg as sla

from .problem import from_coords, to_coords

STEP_FRACTION = 0.98



class _Cones:
    def __init__(self, meta: np.ndarray):
        self.mats = []
        scal = []
        for off, n, kind in meta:
            if kind == 2:
                scal.append(int(off))
            else:
                k = "herm" if kind == 1 else "sym"
                dof = n * n if kind == 1 else n * (n + 1) // 2
                self.mats.append((int(off), int(n), k, int(dof)))
        self.scal = np.array(scal, dtype=np.int64)
        self.nu = sum(n for _, n, _, _ in self.mats) + self.scal.size

    def unpack(self, v: np.ndarray):
        mats = [from_coords(v[..., off : off + dof], n, kind) for off, n, kind, dof in self.mats]
        return mats, v[..., self.scal]

    def pack(self, mats, scal, size: int, lead: tuple = ()) -> np.ndarray:
        out = np.zeros(lead + (size,))
        for (off, n, kind, dof), m in zip(self.mats, mats):
            out[..., off : off + dof] = to_coords(m, kind)
        out[..., self.scal] = scal
        return out

    def identity(self, size: int) -> np.ndarray:
        mats = [np.eye(n, dtype=complex if kind == "herm" else float) for _, n, kind, _ in self.mats]
        return self.pack(mats, np.ones(self.scal.size), size)


def _nt_scaling(x: np.ndarray, z: np.ndarray):
    """``G`` with ``G^-1 X G^-H = G^H Z G = diag(d)``; the NT point is ``W = G G^H``."""
    lx = np.linalg.cholesky(x)
    lz = np.linalg.cholesky(z)
    u, d, vh = np.linalg.svd(lz.conj().T @ lx)
    g = lx @ vh.conj().T / np.sqrt(d)
    gi = (np.sqrt(d)[:, None] * u.conj().T) @ lz.conj().T
    return g, gi, d


def _max_step(xm, xs, dm, ds) -> float:
    """Largest alpha with x + alpha d still in the cone (inf if unbounded)."""
    alpha = math.inf
    for x, d in zip(xm, dm):
        try:
            lc = np.linalg.cholesky(x)
        except np.linalg.LinAlgError:
            return 0.0
        li = sla.solve_triangular(lc, np.eye(x.shape[0]), lower=True)
        w = np.linalg.eigvalsh(li @ d @ li.conj().T)
        if w[0] < 0:
            alpha = min(alpha, -1.0 / w[0])
    neg = ds < 0
    if np.any(neg):
        alpha = min(alpha, float(np.min(-xs[neg] / ds[neg])))
    return alpha


def _independent_rows(a: np.ndarray) -> np.ndarray:
    if a.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    _, r, piv = sla.qr(a.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    keep = d > 1e-10 * max(1.0, d[0])
    return np.sort(piv[: int(np.sum(keep))])


def ipm_solve(a, b, c, meta, tol: float, max_iter: int = 100):
    """Return ``(x, y, status, iterations, pinf, dinf, gap)`` in the given units."""
    cones = _Cones(meta)
    size = c.size
    rows = _independent_rows(a)
    a_full = a
    a, b = a[rows], b[rows]
    m = b.size
    nb = 1.0 + float(np.linalg.norm(b))
    nc = 1.0 + float(np.linalg.norm(c))
    scale = max(1.0, nb, nc)
    x = cones.identity(size) * scale
    z = cones.identity(size) * scale
    y = np.zeros(m)
    status = "max_iter"
    pinf = dinf = gap = math.inf
    best = None
    it = 0
    for it in range(1, max_iter + 1):
        rp = b - a @ x
        rd = c - a.T @ y - z
        pobj, dobj = float(c @ x), float(b @ y)
        pinf = float(np.linalg.norm(rp)) / nb
        dinf = float(np.linalg.norm(rd)) / nc
        # complementarity gap; with both residuals small it bounds |pobj - dobj| up to y.r_p
        gap = float(x @ z) / (1.0 + abs(pobj) + abs(dobj))
        score = max(pinf, dinf, gap)
        if best is None or score < best[0]:
            best = (score, x.copy(), y.copy(), pinf, dinf, gap)
        if pinf <= tol and dinf <= tol and gap <= tol:
            status = "optimal"
            break
        if float(np.linalg.norm(x)) > 1e12:
            status = "unbounded"
            break
        if float(np.linalg.norm(y)) > 1e12:
            status = "infeasible"
            break
        mu = float(x @ z) / cones.nu
        xm, xs = cones.unpack(x)
        zm, zs = cones.unpack(z)
        try:
            scal = [_nt_scaling(xx, zz) for xx, zz in zip(xm, zm)]
        except np.linalg.LinAlgError:
            break  # iterates lost definiteness to rounding; keep the best point so far
        ws = [g @ g.conj().T for g, _, _ in scal]
        gs = np.sqrt(xs / zs)
        ds = np.sqrt(xs * zs)

        def hop(u):
            # W U W block-wise on a coordinate vector or a stack of them
            um, us = cones.unpack(u)
            return cones.pack([w @ uu @ w for w, uu in zip(ws, um)], us * gs * gs, size, u.shape[:-1])

        ha = hop(a)
        mm = a @ ha.T
        mm = (mm + mm.T) / 2
        try:
            fac = sla.cho_factor(mm)
            msolve = lambda r: sla.cho_solve(fac, r)
        except np.linalg.LinAlgError:
            pinv = np.linalg.pinv(mm, rcond=1e-15)
            msolve = lambda r: pinv @ r
        h_rd = hop(rd)

        def direction(rc_vec):
            dy = msolve(rp - a @ (rc_vec - h_rd)) if m else np.zeros(0)
            dz = rd - a.T @ dy
            dx = rc_vec - h_rd + ha.T @ dy
            return dx, dy, dz

        def rhs(target, dxm_a=None, dzm_a=None, dxs_a=None, dzs_a=None):
            # Rc = G V G^H where D V + V D = 2 (target I - D^2 - sym(dX~ dZ~))
            mats = []
            for k, (g, gi, d) in enumerate(scal):
                r = np.diag(target - d * d).astype(g.dtype)
                if dxm_a is not None:
                    dxt = gi @ dxm_a[k] @ gi.conj().T
                    dzt = g.conj().T @ dzm_a[k] @ g
                    r = r - 0.5 * (dxt @ dzt + dzt @ dxt)
                v = 2.0 * r / (d[:, None] + d[None, :])
                mats.append(g @ v @ g.conj().T)
            rs = target - ds * ds
            if dxs_a is not None:
                rs = rs - (dxs_a / gs) * (dzs_a * gs)
            return cones.pack(mats, gs * rs / ds, size)

        # predictor
        dxa, dya, dza = direction(rhs(0.0))
        dxm, dxs = cones.unpack(dxa)
        dzm, dzs = cones.unpack(dza)
        ap = min(1.0, _max_step(xm, xs, dxm, dxs))
        ad = min(1.0, _max_step(zm, zs, dzm, dzs))
        mu_aff = float((x + ap * dxa) @ (z + ad * dza)) / cones.nu
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        dx, dy, dz = direction(rhs(sigma * mu, dxm, dzm, dxs, dzs))
        dxm, dxs = cones.unpack(dx)
        dzm, dzs = cones.unpack(dz)
        ap = min(1.0, STEP_FRACTION * _max_step(xm, xs, dxm, dxs))
        ad = min(1.0, STEP_FRACTION * _max_step(zm, zs, dzm, dzs))
        if ap < 1e-12 and ad < 1e-12:
            break
        x = x + ap * dx
        y = y + ad * dy
        z = z + ad * dz
    if status != "optimal" and best is not None:
        _, x, y, pinf, dinf, gap = best
    y_full = np.zeros(a_full.shape[0])
    y_full[rows] = y
    return x, y_full, status, it, pinf, dinf, gap
