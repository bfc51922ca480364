"""Anti-degradability and degradability certificates.

A channel ``N`` is anti-degradable when ``N = M o N_c`` for some CPTP ``M``
acting on the environment output, and degradable when ``N_c = M o N``. The
composed Choi matrix is linear in ``J(M)``, so the search is a convex
programme over Choi matrices of CPTP maps. The solver's witness is then
projected onto the exact CPTP set and the Frobenius residual
``||J(M o source) - J(target)||_F`` recomputed from it, so a positive
verdict never rests on solver tolerances alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .channels import (
    ChoiMatrix,
    QuantumChannel,
    action_distance,
    choi_input_marginal,
    complementary,
    compose,
    from_choi,
    to_choi,
)
from .linalg import eigh_h
from .sdp import SdpError, SdpProblem, solve

DEFAULT_THRESHOLD = 1e-6
SDP_TOL = 1e-9

ANTIDEGRADABLE = "antidegradable"
DEGRADABLE = "degradable"
NEITHER = "neither_proven"


@dataclass(frozen=True)
class DegradabilityCertificate:
    verdict: str               # antidegradable | degradable | neither_proven
    direction: str             # which relation was tested: antidegradable | degradable
    residual: float            # Frobenius distance of J(M o source) to J(target)
    threshold: float
    witness: ChoiMatrix | None  # CPTP degrading map (source output -> target output)
    solver_status: str = "optimal"

    @property
    def proven(self) -> bool:
        return self.verdict == self.direction

    def witness_channel(self) -> QuantumChannel | None:
        return None if self.witness is None else from_choi(self.witness, tol=1e-7)

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "direction": self.direction,
            "residual": self.residual,
            "threshold": self.threshold,
            "solver_status": self.solver_status,
            "witness": None,
        }
        if self.witness is not None:
            m = self.witness.matrix
            out["witness"] = {
                "in_dim": self.witness.in_dim,
                "out_dim": self.witness.out_dim,
                "choi": [[[float(z.real), float(z.imag)] for z in row] for row in m],
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def composed_choi(j_m: np.ndarray, j_src: np.ndarray, d_in: int, d_mid: int, d_out: int) -> np.ndarray:
    """Choi matrix of ``M o S`` from ``J(M)`` (mid -> out) and ``J(S)`` (in -> mid).

    Accepts a stack of ``J(M)`` along the first axis.
    """
    stack = j_m.ndim == 3
    jm = j_m if stack else j_m[None]
    jm = jm.reshape(-1, d_out, d_mid, d_out, d_mid)
    js = j_src.reshape(d_mid, d_in, d_mid, d_in)
    out = np.einsum("kbeBE,eaEA->kbaBA", jm, js).reshape(-1, d_out * d_in, d_out * d_in)
    return out if stack else out[0]


def project_cptp(j: np.ndarray, in_dim: int, out_dim: int) -> np.ndarray:
    """Nearby exact CPTP Choi matrix: clip negative eigenvalues, then renormalise the input marginal."""
    j = (j + j.conj().T) / 2
    w, v = eigh_h(j)
    j = (v * np.clip(w, 0.0, None)) @ v.conj().T
    t = choi_input_marginal(j, in_dim, out_dim)
    tw, tv = eigh_h(t)
    if tw[0] <= 1e-12:
        raise SdpError("degrading-map witness has a singular input marginal")
    t_inv_sqrt = (tv / np.sqrt(tw)) @ tv.conj().T
    s = np.kron(np.eye(out_dim), t_inv_sqrt.T)
    out = s @ j @ s.conj().T
    return (out + out.conj().T) / 2


def _search(source: QuantumChannel, target: QuantumChannel, tol: float):
    """Minimise the spectral norm of ``J(M o source) - J(target)`` over CPTP ``M``.

    Exact feasibility does not depend on the norm; the spectral norm keeps
    the programme at two PSD blocks of the Choi size instead of a
    quadratically larger second-order-cone embedding. The reported residual
    is the Frobenius norm recomputed from the projected witness.
    """
    d_in, d_mid, d_out = source.in_dim, source.out_dim, target.out_dim
    j_src = to_choi(source).matrix
    j_tgt = to_choi(target).matrix
    size = d_out * d_in
    prob = SdpProblem()
    jm = prob.add_block(d_out * d_mid, "herm", "degrading_choi")
    t = prob.add_block(1, "sym", "bound")
    marginal = jm.linmap(lambda m: np.einsum("kaiaj->kij", m.reshape(-1, d_out, d_mid, d_out, d_mid)), d_mid)
    prob.constrain_eq(marginal, np.eye(d_mid))
    diff = jm.linmap(lambda m: composed_choi(m, j_src, d_in, d_mid, d_out), size) - j_tgt
    t_eye = t.linmap(lambda m: m[:, :1, :1] * np.eye(size)[None], size)
    prob.constrain_psd(t_eye - diff)
    prob.constrain_psd(t_eye + diff)
    prob.minimize(t.trace())
    sol = solve(prob, tol=tol)
    return sol, j_src, j_tgt


def _certify(source: QuantumChannel, target: QuantumChannel, direction: str, threshold: float, tol: float) -> DegradabilityCertificate:
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if source.in_dim != target.in_dim:
        raise ValueError("source and target channels act on different inputs")
    sol, j_src, j_tgt = _search(source, target, tol)
    if sol.status in ("infeasible", "unbounded") or not sol.blocks:
        raise SdpError(f"degrading-map search failed with status {sol.status}", sol)
    d_in, d_mid, d_out = source.in_dim, source.out_dim, target.out_dim
    witness = project_cptp(sol.blocks[0], d_mid, d_out)
    residual = float(np.linalg.norm(composed_choi(witness, j_src, d_in, d_mid, d_out) - j_tgt))
    if residual <= threshold:
        return DegradabilityCertificate(direction, direction, residual, threshold, ChoiMatrix(d_mid, d_out, witness), sol.status)
    if not sol.ok:
        raise SdpError(f"degrading-map search did not converge (status {sol.status}, residual {residual:.3e})", sol)
    return DegradabilityCertificate(NEITHER, direction, residual, threshold, None, sol.status)


def certify_antidegradable(c: QuantumChannel, threshold: float = DEFAULT_THRESHOLD, tol: float = SDP_TOL) -> DegradabilityCertificate:
    """Look for ``M`` (environment -> output) with ``N = M o N_c``."""
    return _certify(complementary(c), c, ANTIDEGRADABLE, threshold, tol)


def certify_degradable(c: QuantumChannel, threshold: float = DEFAULT_THRESHOLD, tol: float = SDP_TOL) -> DegradabilityCertificate:
    """Look for ``M`` (output -> environment) with ``N_c = M o N``."""
    return _certify(c, complementary(c), DEGRADABLE, threshold, tol)


def witness_error(c: QuantumChannel, cert: DegradabilityCertificate) -> float:
    """Max deviation over matrix units between the composition and the channel it should reproduce."""
    m = cert.witness_channel()
    if m is None:
        raise ValueError("certificate carries no witness")
    if cert.direction == ANTIDEGRADABLE:
        return action_distance(compose(m, complementary(c)), c)
    return action_distance(compose(m, c), complementary(c))
