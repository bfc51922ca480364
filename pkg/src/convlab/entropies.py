"""Von Neumann and one-shot conditional entropies, in bits.

Min-entropies are SDPs: ``2^{-H_min(A|B)} = min{Tr s_B : rho_AB <= I_A (x) s_B}``.
The smooth version optimises jointly over sub-normalised ``rho'`` in the
purified-distance ball, using the fidelity epigraph for the ball constraint.
Max-entropies are obtained from a purification (``#purifier``) by duality;
:func:`h_max_direct` and :func:`h_max_smooth_direct` compute them on the
conditioning side instead, for cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .linalg import (
    DensityState,
    LayoutError,
    StateError,
    eigh_h,
    purified_distance,
    partial_trace,
    permute,
    purify,
)
from .sdp import SdpError, SdpProblem, SdpSolution, fidelity_epigraph, solve

PURIFIER = "#purifier"
SDP_TOL = 1e-7
NOISE_FLOOR = 1e-9


def _labels(x) -> list[str]:
    if x is None:
        return []
    if isinstance(x, str):
        return [x]
    return list(x)


def _log2(x: float) -> float:
    return math.log2(x)


@dataclass(frozen=True)
class EntropyRequest:
    """Target/conditioning split of a state plus a smoothing parameter."""

    state: DensityState
    target: tuple[str, ...]
    conditioning: tuple[str, ...]
    eps: float = 0.0

    def __init__(self, state: DensityState, target, conditioning=(), eps: float = 0.0):
        tgt, cond = tuple(_labels(target)), tuple(_labels(conditioning))
        if not tgt:
            raise LayoutError("target system is empty")
        if set(tgt) & set(cond):
            raise LayoutError("target and conditioning systems overlap")
        for lab in tgt + cond:
            state.layout.index(lab)
        if not 0.0 <= eps < 1.0:
            raise ValueError(f"smoothing parameter must lie in [0, 1), got {eps}")
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "target", tgt)
        object.__setattr__(self, "conditioning", cond)
        object.__setattr__(self, "eps", float(eps))

    def split(self) -> tuple[np.ndarray, int, int]:
        """Matrix on ``A (x) B`` (target factors first) and the two dimensions."""
        s = self.state
        keep = list(self.target) + list(self.conditioning)
        if set(keep) != set(s.layout.labels):
            s = partial_trace(s, keep)
        order = [lab for lab in s.layout.labels if lab in self.target] + [lab for lab in s.layout.labels if lab in self.conditioning]
        s = permute(s, order)
        da = s.layout.dim_of(self.target)
        db = s.layout.dim_of(self.conditioning) if self.conditioning else 1
        return s.matrix, da, db

    def reduced(self) -> DensityState:
        keep = list(self.target) + list(self.conditioning)
        s = partial_trace(self.state, keep)
        order = [lab for lab in s.layout.labels if lab in self.target] + [lab for lab in s.layout.labels if lab in self.conditioning]
        return permute(s, order)


def _require_normalized(s: DensityState) -> None:
    if not s.is_normalized:
        raise StateError(f"operation requires a normalised state (trace {s.normalization!r})")


# ---------------------------------------------------------------------------
# von Neumann quantities


def von_neumann(s: DensityState) -> float:
    _require_normalized(s)
    w = eigh_h(s.matrix)[0]
    w = w[w > 1e-12]
    return float(max(0.0, -np.sum(w * np.log2(w))))


def conditional_entropy(s: DensityState, target, conditioning) -> float:
    """``S(A|B) = S(AB) - S(B)``."""
    _require_normalized(s)
    req = EntropyRequest(s, target, conditioning)
    ab = partial_trace(s, req.target + req.conditioning)
    if not req.conditioning:
        return von_neumann(ab)
    return von_neumann(ab) - von_neumann(partial_trace(s, req.conditioning))


def coherent_information(s: DensityState, target, conditioning) -> float:
    """``I(A>B) = -S(A|B)``."""
    return -conditional_entropy(s, target, conditioning)


# ---------------------------------------------------------------------------
# min-entropy


@dataclass
class MinEntropyResult:
    value: float
    solution: SdpSolution
    sigma: np.ndarray
    smoothed: np.ndarray | None = None  # optimal rho' on A (x) B


def _min_entropy_sdp(rho: np.ndarray, da: int, db: int, eps: float | None, tol: float) -> MinEntropyResult:
    prob = SdpProblem()
    sigma = prob.add_block(db, "herm", "sigma")
    if eps is None:
        prob.constrain_psd(sigma.kron_left(da) - rho)
        rho_var = None
    else:
        fb = fidelity_epigraph(prob, None, rho)
        rho_var = fb.r
        prob.constrain_psd(sigma.kron_left(da) - rho_var)
        prob.constrain_le(rho_var.trace(), 1.0)
        prob.constrain_ge(fb.re_tr_x, math.sqrt(1.0 - eps * eps))
    prob.minimize(sigma.trace())
    sol = solve(prob, tol=tol)
    if not sol.ok:
        raise SdpError(f"min-entropy SDP failed with status {sol.status}", sol)
    opt = sol.objective
    if opt <= 0:
        raise SdpError(f"min-entropy SDP returned non-positive optimum {opt!r}", sol)
    smoothed = sol.value(rho_var) if rho_var is not None else None
    return MinEntropyResult(-_log2(opt), sol, sol.blocks[0], smoothed)


def h_min_detail(s: DensityState, target, conditioning, eps: float | None = None, tol: float = SDP_TOL) -> MinEntropyResult:
    req = EntropyRequest(s, target, conditioning, eps or 0.0)
    if eps is not None:
        _require_normalized(s)
    rho, da, db = req.split()
    if eps == 0.0:
        # the zero-radius ball is the single point rho; the joint programme has
        # no strictly feasible point there, so solve the exact one instead
        res = _min_entropy_sdp(rho, da, db, None, tol)
        res.smoothed = rho
        return res
    return _min_entropy_sdp(rho, da, db, eps, tol)


def h_min(s: DensityState, target, conditioning, tol: float = SDP_TOL) -> float:
    """``H_min(A|B)``; systems outside ``A u B`` are traced out first."""
    return h_min_detail(s, target, conditioning, None, tol).value


def h_min_smooth(s: DensityState, target, conditioning, eps: float, tol: float = SDP_TOL) -> float:
    """Smooth min-entropy over sub-normalised states within purified distance ``eps``."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"smoothing parameter must lie in [0, 1), got {eps}")
    return h_min_detail(s, target, conditioning, eps, tol).value


# ---------------------------------------------------------------------------
# max-entropy through a purification


def _purified_pair(s: DensityState, target, conditioning):
    req = EntropyRequest(s, target, conditioning)
    _require_normalized(s)
    ab = req.reduced()
    psi = purify(ab, PURIFIER)
    ac = partial_trace(psi, list(req.target) + [PURIFIER])
    return req, ab, psi, ac


def h_max(s: DensityState, target, conditioning, tol: float = SDP_TOL) -> float:
    """``H_max(A|B) = -H_min(A|C)`` with ``C`` purifying ``AB``."""
    req, _, _, ac = _purified_pair(s, target, conditioning)
    return -h_min(ac, req.target, [PURIFIER], tol)


def h_max_smooth(s: DensityState, target, conditioning, eps: float, tol: float = SDP_TOL) -> float:
    """``H^eps_max(A|B) = -H^eps_min(A|C)`` with ``C`` purifying ``AB``."""
    req, _, _, ac = _purified_pair(s, target, conditioning)
    return -h_min_smooth(ac, req.target, [PURIFIER], eps, tol)


# ---------------------------------------------------------------------------
# max-entropy on the conditioning side


def max_entropy_fidelity(rho: np.ndarray, da: int, db: int, tol: float = SDP_TOL) -> float:
    """``log2 max_s ||sqrt(rho) sqrt(I (x) s)||_1^2`` over normalised ``s`` on B."""
    prob = SdpProblem()
    sigma = prob.add_block(db, "herm")
    prob.constrain_eq(sigma.trace(), 1.0)
    fb = fidelity_epigraph(prob, rho, sigma.kron_left(da))
    prob.maximize(fb.re_tr_x)
    sol = solve(prob, tol=tol)
    if not sol.ok:
        raise SdpError(f"max-entropy SDP failed with status {sol.status}", sol)
    return 2.0 * _log2(sol.objective)


def h_max_direct(s: DensityState, target, conditioning, tol: float = SDP_TOL) -> float:
    """Non-smooth max-entropy from the fidelity formula, without purifying."""
    req = EntropyRequest(s, target, conditioning)
    rho, da, db = req.split()
    return max_entropy_fidelity(rho, da, db, tol)


@dataclass
class DirectMaxEntropy:
    value: float
    smoothed: DensityState  # candidate rho'_AB in the smoothing ball
    ball_distance: float     # purified distance of the candidate to rho_AB


def h_max_smooth_direct(s: DensityState, target, conditioning, eps: float, tol: float = SDP_TOL) -> DirectMaxEntropy:
    """Smooth max-entropy evaluated on the conditioning side.

    The optimal smoothed operator of the purifier-side min-entropy programme
    is lifted (Uhlmann) to a pure extension aligned with the purification,
    reduced to ``AB``, and its max-entropy is computed from the fidelity
    formula on ``B``. The returned candidate lies in the ``eps``-ball around
    ``rho_AB``; its max-entropy upper-bounds the smooth max-entropy.
    """
    req, ab, psi, ac = _purified_pair(s, target, conditioning)
    da = ab.layout.dim_of(req.target)
    db = ab.layout.total // da
    dc = psi.layout.dims[-1]
    res = h_min_detail(ac, req.target, [PURIFIER], eps, tol)
    rho_t = res.smoothed
    # psi as an (AC) x B matrix; psi layout is (A..., B..., C)
    t = psi.amplitudes.reshape(da, db, dc)
    big_psi = t.transpose(0, 2, 1).reshape(da * dc, db)
    w, v = eigh_h(rho_t)
    phi = v * np.sqrt(np.clip(w, 0.0, None))
    u, sv, vh = np.linalg.svd(big_psi.conj().T @ phi, full_matrices=False)
    lifted = phi @ (vh.conj().T @ u.conj().T)  # (AC) x B
    vec = lifted.reshape(da, dc, db).transpose(0, 2, 1).reshape(-1)
    joint = np.outer(vec, vec.conj()).reshape(da * db, dc, da * db, dc)
    rho_ab = np.einsum("xcyc->xy", joint)
    # the smoothing optimum is usually rank-deficient; eigenvalues left at the
    # solver's noise level make the fidelity programme below nearly singular
    w, v = eigh_h(rho_ab)
    w = np.where(w > NOISE_FLOOR * max(1.0, float(w[-1])), w, 0.0)
    rho_ab = (v * w) @ v.conj().T
    tr = float(np.trace(rho_ab).real)
    if tr > 1.0:
        rho_ab = rho_ab / tr
    cand = DensityState(ab.layout, rho_ab)
    dist = purified_distance(cand, ab)
    return DirectMaxEntropy(max_entropy_fidelity(rho_ab, da, db, tol), cand, dist)
