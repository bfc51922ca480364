"""First-order dual ADMM ("boundary point") solver for dense SDPs.

The iteration (Wen-Goldfarb-Yin form, over-relaxed) is

    y   = (A A^T)^+ (mu (b - A x) + A (c - s))
    v   = c - A^T y - mu x
    s   = proj_PSD(v)
    x  <- (1 - rho) x + rho (s - v) / mu

with ``mu`` rebalanced from the ratio of primal and dual residuals. Hermitian
blocks are projected through their real symmetric embedding
``[[Re X, -Im X], [Im X, Re X]]``. Infeasibility is declared from a phase-1
problem minimising the l1 constraint violation.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _kernel_py
from .ipm import ipm_solve
from .problem import Affine, Scalar, SdpProblem, from_coords, hmat

log = logging.getLogger(__name__)

try:  # pragma: no cover - exercised implicitly when the extension is built
    from . import _admm_ext as _native
except ImportError:  # pragma: no cover
    _native = None

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 50000
RHO = 1.6
CHECK_EVERY = 10
CHUNK = 1000
PHASE1_THRESHOLD = 1e-6
AUTO_ADMM_BUDGET = 1000


def available_backends() -> list[str]:
    return (["native"] if _native is not None else []) + ["python"]


def default_backend() -> str:
    if os.environ.get("CONVLAB_PURE_PYTHON") or _native is None:
        return "python"
    return "native"


def _kernel(backend: str):
    if backend == "native":
        if _native is None:
            raise RuntimeError("compiled ADMM kernel is not available")
        return _native.admm_run
    if backend == "python":
        return _kernel_py.admm_run
    raise ValueError(f"unknown backend {backend!r}")


class SdpError(RuntimeError):
    """Raised by callers that need an optimal solution and did not get one."""

    def __init__(self, message: str, solution: "SdpSolution | None" = None):
        super().__init__(message)
        self.solution = solution


@dataclass
class SdpSolution:
    status: str  # optimal | infeasible | unbounded | max_iter
    blocks: list[np.ndarray]
    objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    dual_objective: float
    iterations: int
    backend: str
    coords: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    offsets: list[int] = field(repr=False, default_factory=list)
    phase1_value: float | None = None
    method: str = "admm"

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def value(self, expr):
        """Evaluate an :class:`Affine` or :class:`Scalar` at the solution."""
        if isinstance(expr, Scalar):
            total = expr.const
            for b, t in expr.terms.items():
                seg = self.coords[self.offsets[b] : self.offsets[b] + t.shape[-1]]
                total += float(np.atleast_2d(t)[0] @ seg)
            return total
        if isinstance(expr, Affine):
            h = np.zeros(expr.dim * expr.dim)
            for b, t in expr.terms.items():
                seg = self.coords[self.offsets[b] : self.offsets[b] + t.shape[1]]
                h += t @ seg
            return hmat(h, expr.dim) + expr.const
        raise TypeError("expected an Affine or Scalar expression")

    def require(self, what: str = "SDP") -> "SdpSolution":
        if not self.ok:
            raise SdpError(f"{what} did not solve to optimality (status {self.status}, residual {self.primal_residual:.2e}, gap {self.gap:.2e})", self)
        return self


@dataclass
class _Std:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    meta: np.ndarray
    pinv: np.ndarray
    row_scale: np.ndarray
    bscale: float
    cscale: float


def _prepare(a, b, c, meta):
    """Drop empty rows, normalise rows, check the affine system, scale b and c."""
    norms = np.linalg.norm(a, axis=1)
    empty = norms < 1e-14
    if np.any(np.abs(b[empty]) > 1e-10):
        return None
    a, b, norms = a[~empty], b[~empty], norms[~empty]
    a = a / norms[:, None]
    b = b / norms
    if a.shape[0]:
        gram = a @ a.T
        w, u = np.linalg.eigh(gram)
        cut = 1e-10 * max(1.0, float(w[-1]))
        inv = np.where(w > cut, 1.0 / np.where(w > cut, w, 1.0), 0.0)
        pinv = (u * inv) @ u.T
        proj = a.T @ (pinv @ b)
        if np.linalg.norm(a @ proj - b) > 1e-8 * (1.0 + np.linalg.norm(b)):
            return None
    else:
        pinv = np.zeros((0, 0))
    bscale = max(1.0, float(np.linalg.norm(b)))
    cscale = max(1.0, float(np.linalg.norm(c)))
    return _Std(
        np.ascontiguousarray(a),
        np.ascontiguousarray(b / bscale),
        np.ascontiguousarray(c / cscale),
        np.ascontiguousarray(meta, dtype=np.int64),
        np.ascontiguousarray(pinv),
        norms,
        bscale,
        cscale,
    )


def _run(std: _Std, kernel, tol: float, max_iter: int, phase1_ok: bool, backend: str):
    n = std.c.size
    m = std.b.size
    x = np.zeros(n)
    s = np.zeros(n)
    y = np.zeros(m)
    mu = 1.0
    total = 0
    status = "max_iter"
    phase1_value = None
    pinf = dinf = gap = math.inf
    history = []
    while total < max_iter:
        steps = min(CHUNK, max_iter - total)
        it, mu, pinf, dinf, gap = kernel(std.a, std.pinv, std.b, std.c, x, s, y, std.meta, mu, RHO, tol, steps, CHECK_EVERY)
        total += it
        if pinf <= tol and dinf <= tol and gap <= tol:
            status = "optimal"
            break
        xn = float(np.linalg.norm(x))
        if not np.isfinite(xn) or xn > 1e10:
            status = "unbounded"
            break
        history.append(pinf)
        stalled = len(history) >= 3 and pinf > max(100 * tol, 1e-5) and pinf > 0.5 * history[-3]
        if phase1_ok and phase1_value is None and (stalled or total >= max_iter):
            phase1_value = _phase1(std, kernel, backend)
            log.debug("phase-1 residual %.3e after %d iterations", phase1_value, total)
            if phase1_value > PHASE1_THRESHOLD:
                status = "infeasible"
                break
    return x, s, y, status, total, pinf, dinf, gap, phase1_value


def _phase1(std: _Std, kernel, backend: str) -> float:
    """Minimum l1 violation of the (normalised) equality constraints over the cones."""
    m, n = std.a.shape
    a1 = np.hstack([std.a, np.eye(m), -np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(2 * m)])
    meta1 = np.vstack([std.meta, np.array([(n + k, 1, 2) for k in range(2 * m)], dtype=np.int64).reshape(-1, 3)])
    prep = _prepare(a1, std.b.copy(), c1, meta1)
    if prep is None:
        return math.inf
    x, s, y, status, *_ = _run(prep, kernel, 1e-8, 20000, False, backend)
    xp = _kernel_py.project(x, _kernel_py._views(prep.meta), np.empty_like(x))
    return float(c1 @ xp) * prep.bscale


def _project(std: _Std, x: np.ndarray) -> np.ndarray:
    return _kernel_py.project(x, _kernel_py._views(std.meta), np.empty_like(x))


def _projected_residual(std: _Std, x: np.ndarray) -> float:
    """Relative equality residual (scaled units) of the cone projection of ``x``."""
    if not std.b.size:
        return 0.0
    return float(np.linalg.norm(std.a @ _project(std, x) - std.b)) / (1.0 + float(np.linalg.norm(std.b)))


def solve(
    problem: SdpProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    backend: str | None = None,
    method: str = "auto",
) -> SdpSolution:
    """Solve ``problem``; never raises on numerical failure, check ``status``.

    ``method="admm"`` runs only the operator-splitting iterations (with the
    phase-1 infeasibility test). ``"auto"`` gives ADMM a short budget, hands
    an unconverged problem to the interior-point method, and returns to a
    full ADMM run with phase-1 only if that fails too. ``"ipm"`` skips ADMM.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method not in ("auto", "admm", "ipm"):
        raise ValueError(f"unknown method {method!r}")
    backend = backend or default_backend()
    kernel = _kernel(backend)
    a, b, c, meta = problem.compile()
    offsets = problem.offsets()
    sign = 1.0 if problem.sense == "min" else -1.0
    std = _prepare(a, b, c, meta)
    if std is None:
        return SdpSolution("infeasible", [], math.nan, math.inf, math.inf, math.inf, math.nan, 0, backend, offsets=offsets, method=method)
    used = "admm"
    p1 = None
    user_tol = tol
    # residuals are measured after scaling b and c; tighten so the error holds in problem units
    tol = tol / max(1.0, std.bscale * std.cscale)
    if method == "admm":
        x, _, y, status, iters, pinf, dinf, gap, p1 = _run(std, kernel, tol, max_iter, True, backend)
    else:
        iters = 0
        status = "max_iter"
        if method == "auto":
            x, _, y, status, iters, pinf, dinf, gap, _ = _run(std, kernel, tol, min(max_iter, AUTO_ADMM_BUDGET), False, backend)
            if status == "optimal" and _projected_residual(std, x) > tol:
                status = "max_iter"  # the over-relaxed iterate can sit slightly outside the cone
        if status not in ("optimal", "unbounded"):
            xi, yi, st_i, it_i, pi_i, di_i, g_i = ipm_solve(std.a, std.b, std.c, std.meta, tol)
            iters += it_i
            x, y, status, pinf, dinf, gap, used = xi, yi, st_i, pi_i, di_i, g_i, "ipm"
            if status != "optimal" and method == "auto" and max_iter > AUTO_ADMM_BUDGET:
                xa, _, ya, st_a, it_a, pa, da, ga, p1 = _run(std, kernel, tol, max_iter, True, backend)
                iters += it_a
                if st_a in ("optimal", "infeasible", "unbounded") or max(pa, da, ga) < max(pinf, dinf, gap):
                    x, y, status, pinf, dinf, gap, used = xa, ya, st_a, pa, da, ga, "admm"
            elif status not in ("optimal", "unbounded"):
                p1 = _phase1(std, kernel, backend)
                status = "infeasible" if p1 > PHASE1_THRESHOLD else "max_iter"
    xp = _project(std, x) * std.bscale
    # objective in the problem's own sense
    obj = sign * float(c @ xp) + problem.objective_const
    dual = sign * float((std.b * std.bscale) @ y) * std.cscale + problem.objective_const
    pres = _projected_residual(std, x)
    if status == "optimal" and pres > user_tol:
        status = "max_iter"
    blocks = []
    for k, blk in enumerate(problem.blocks):
        seg = xp[offsets[k] : offsets[k] + blk.dof]
        blocks.append(from_coords(seg, blk.dim, blk.kind))
    return SdpSolution(
        status=status,
        blocks=blocks,
        objective=obj,
        primal_residual=pres if status != "infeasible" else max(pres, pinf),
        dual_residual=dinf,
        gap=gap,
        dual_objective=dual,
        iterations=iters,
        backend=backend,
        coords=xp,
        offsets=offsets,
        phase1_value=p1,
        method=used,
    )
