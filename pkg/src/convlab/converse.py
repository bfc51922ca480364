"""Converse bounds for anti-degradable channels and executable proof chains.

The private bound is ``2 log2(1/cos(alpha + beta))`` with ``alpha = asin eps``
and ``beta = asin delta``; the quantum bound is ``log2(1/cos(2 alpha))``.
The chain verifiers recompute every inequality of the two converse proofs
on a concrete channel and code, using the certified degrading map for the
data-processing step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .channels import QuantumChannel, tensor_power
from .codes import EntGenCode, PrivateCode, eval_entgen, eval_private, env_labels, out_labels
from .degradability import ANTIDEGRADABLE, DegradabilityCertificate, certify_antidegradable
from .entropies import h_max_smooth, h_min_smooth
from .linalg import DensityState, StateError

CHAIN_TOL = 1e-4
DUALITY_TOL = 2e-4
# points whose region sum lies within this distance of 1 count as boundary
BOUNDARY_GUARD = 1e-12
INV_SQRT2 = 1.0 / math.sqrt(2.0)


class ConverseDomainError(ValueError):
    """Parameters outside the range where a bound or lemma applies."""


class PreconditionError(ValueError):
    """A chain was requested for a channel or code that violates the bound's hypotheses."""


def _unit(name: str, x: float) -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {x!r}")
    return x


@dataclass(frozen=True)
class ConverseParams:
    eps: float
    delta: float | None = None
    alpha: float = field(init=False)
    beta: float | None = field(init=False)

    def __post_init__(self):
        e = _unit("eps", self.eps)
        object.__setattr__(self, "eps", e)
        object.__setattr__(self, "alpha", math.asin(e))
        if self.delta is None:
            object.__setattr__(self, "beta", None)
        else:
            d = _unit("delta", self.delta)
            object.__setattr__(self, "delta", d)
            object.__setattr__(self, "beta", math.asin(d))


def region_sum(eps: float, delta: float) -> float:
    """``delta sqrt(1 - eps^2) + eps sqrt(1 - delta^2)``, i.e. ``sin(alpha + beta)``."""
    e, d = _unit("eps", eps), _unit("delta", delta)
    return d * math.sqrt(1.0 - e * e) + e * math.sqrt(1.0 - d * d)


def region_check(eps: float, delta: float) -> bool:
    """Strict region inequality; the boundary ``sin(alpha + beta) = 1`` is excluded."""
    return region_sum(eps, delta) < 1.0 - BOUNDARY_GUARD


def _cos_sum(eps: float, delta: float) -> float:
    # cos(alpha + beta) without cancellation in asin/cos
    return math.sqrt(1.0 - eps * eps) * math.sqrt(1.0 - delta * delta) - eps * delta


def private_bound(eps: float, delta: float) -> float:
    """``2 log2(1/cos(alpha + beta))`` bits.

    Requires the strict region inequality on the branch ``alpha + beta < pi/2``
    that the proof covers; anything else raises :class:`ConverseDomainError`.
    """
    e, d = _unit("eps", eps), _unit("delta", delta)
    if not region_check(e, d):
        raise ConverseDomainError("(eps, delta) is on the region boundary or outside the region; the bound diverges")
    c = _cos_sum(e, d)
    if c <= 0.0:
        raise ConverseDomainError("alpha + beta exceeds pi/2; the bound is only established below it")
    return 2.0 * math.log2(1.0 / c)


def quantum_bound(eps: float) -> float:
    """``log2(1/cos(2 alpha))`` bits for ``eps < 1/sqrt(2)``."""
    e = _unit("eps", eps)
    c = 1.0 - 2.0 * e * e  # cos(2 asin e)
    if c <= BOUNDARY_GUARD:
        raise ConverseDomainError("eps ≥ 1/√2")
    return math.log2(1.0 / c)


def region_curve(grid_step: float) -> list[tuple[float, float]]:
    """Boundary samples ``(eps, delta_max)`` for ``eps = 0, step, 2 step, ... <= 1``.

    ``delta_max`` is the supremum of the deltas reachable from ``delta = 0``
    without leaving the region, i.e. the solution of ``sin(alpha + beta) = 1``.
    """
    step = float(grid_step)
    if not 0.0 < step < 1.0:
        raise ValueError("grid step must lie in (0, 1)")
    count = math.floor(1.0 / step + 1e-9) + 1
    out = []
    for i in range(count):
        e = min(1.0, i * step)
        out.append((e, math.sqrt(max(0.0, 1.0 - e * e))))
    return out


# ---------------------------------------------------------------------------
# reports


@dataclass
class ChainStep:
    name: str
    lhs: float
    rhs: float
    tol: float = CHAIN_TOL

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tol

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack, "pass": self.passed, "tol": self.tol}


@dataclass
class ChainReport:
    chain: str
    steps: list[ChainStep]
    tol: float = CHAIN_TOL
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.steps)

    def step(self, name: str) -> ChainStep:
        for s in self.steps:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "chain": self.chain,
            "steps": [s.to_dict() for s in self.steps],
            "pass": self.passed,
            "tol": self.tol,
            "info": self.info,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# smooth-entropy uncertainty relation


def lemma1_gap(alpha: float, beta: float) -> float:
    """``log2(1/cos^2(alpha + beta))``."""
    return -2.0 * math.log2(math.cos(alpha + beta))


def verify_lemma1(s: DensityState, target, conditioning, alpha: float, beta: float, tol: float = CHAIN_TOL) -> ChainReport:
    """``H_min^{sin a}(A|B) <= H_max^{sin b}(A|B) + log2(1/cos^2(a + b))``."""
    if alpha < 0 or beta < 0 or alpha + beta >= math.pi / 2:
        raise ConverseDomainError("need alpha, beta >= 0 and alpha + beta < pi/2")
    if not s.is_normalized:
        raise StateError("verification requires a normalised state")
    lhs = h_min_smooth(s, target, conditioning, math.sin(alpha))
    rhs = h_max_smooth(s, target, conditioning, math.sin(beta)) + lemma1_gap(alpha, beta)
    return ChainReport("lemma1", [ChainStep("lemma1", lhs, rhs, tol)], tol, {"alpha": alpha, "beta": beta})


# ---------------------------------------------------------------------------
# proof chains


def _antidegradable_witness(c: QuantumChannel, certificate: DegradabilityCertificate | None) -> tuple[QuantumChannel, DegradabilityCertificate]:
    cert = certificate if certificate is not None else certify_antidegradable(c)
    if cert.direction != ANTIDEGRADABLE or not cert.proven:
        raise PreconditionError(f"channel is not certified anti-degradable (verdict {cert.verdict}, residual {cert.residual:.3e})")
    m = cert.witness_channel()
    if m.in_dim != c.env_dim or m.out_dim != c.out_dim:
        raise PreconditionError("certificate witness does not map this channel's environment to its output")
    return m, cert


def _degrade(witness: QuantumChannel, state: DensityState, n: int, dim_env: int, other: str, other_dim: int, first: bool) -> DensityState:
    """Apply ``witness^{(x)n}`` to ``E^n`` of a state on ``(E^n, other)`` or ``(other, E^n)``."""
    wn = tensor_power(witness, n)
    dims = [dim_env, other_dim] if first else [other_dim, dim_env]
    idx = 0 if first else 1
    m = wn.apply_on(state.matrix, dims, idx)
    b = [(lab, witness.out_dim) for lab in out_labels(n)]
    layout = b + [(other, other_dim)] if first else [(other, other_dim)] + b
    return DensityState(layout, m)


def _declared(name: str, achieved: float, declared: float | None) -> float:
    if declared is None:
        return achieved
    declared = _unit(name, declared)
    if achieved > declared + 1e-9:
        raise PreconditionError(f"achieved {name} = {achieved:.9g} exceeds the declared {declared:.9g}")
    return declared


def verify_private_chain(
    c: QuantumChannel,
    code: PrivateCode,
    certificate: DegradabilityCertificate | None = None,
    tol: float = CHAIN_TOL,
    eps: float | None = None,
    delta: float | None = None,
) -> ChainReport:
    """Recompute each inequality of the private-capacity converse on ``code``.

    Steps: decoupling (``log M <= H_min^delta(X'|E^n)``), degrading-map data
    processing, correctness (``0 <= -H_max^eps(X'|X)``), decoder data
    processing, the uncertainty relation on ``sigma^{B^n X'}``, and the final bound.

    ``eps`` and ``delta`` optionally declare the code's operating point; they
    must dominate the achieved values and are then used for the smoothing
    radii and the bound. By default the achieved values are used.
    """
    witness, cert = _antidegradable_witness(c, certificate)
    perf = eval_private(c, code)
    eps = _declared("eps", perf.eps, eps)
    delta = _declared("delta", perf.delta, delta)
    try:
        bound = private_bound(eps, delta)
    except ConverseDomainError as exc:
        raise ConverseDomainError(f"achieved (eps, delta) = ({eps:.6g}, {delta:.6g}) is not in the region: {exc}") from None
    alpha, beta = math.asin(eps), math.asin(delta)
    n, m = code.n, code.M
    el, bl = env_labels(n), out_labels(n)
    sigma_ex, sigma_bx, xi = perf.states["sigma_EX'"], perf.states["sigma_BX'"], perf.states["xi_XX'"]
    log_m = math.log2(m)

    h_e = h_min_smooth(sigma_ex, ["X'"], el, delta)
    degraded = _degrade(witness, sigma_ex, n, sigma_ex.layout.total // m, "X'", m, True)
    h_b_degraded = h_min_smooth(degraded, ["X'"], bl, delta)
    hmax_x = h_max_smooth(xi, ["X'"], ["X"], eps)
    hmax_b = h_max_smooth(sigma_bx, ["X'"], bl, eps)
    h_b = h_min_smooth(sigma_bx, ["X'"], bl, delta)
    gap = lemma1_gap(alpha, beta)
    steps = [
        ChainStep("decoupling", log_m, h_e, tol),
        ChainStep("degrading_map", h_e, h_b_degraded, tol),
        ChainStep("correctness", 0.0, -hmax_x, tol),
        ChainStep("decoding", -hmax_x, -hmax_b, tol),
        ChainStep("lemma1", h_b, hmax_b + gap, tol),
        ChainStep("bound", log_m, bound, tol),
    ]
    info = {
        "eps": eps,
        "delta": delta,
        "achieved_eps": perf.eps,
        "achieved_delta": perf.delta,
        "alpha": alpha,
        "beta": beta,
        "n": n,
        "M": m,
        "certificate_residual": cert.residual,
        "degraded_state_deviation": float(abs(degraded.matrix - sigma_bx.matrix).max()),
        "omega_policy": "minimised per code",
    }
    return ChainReport("private", steps, tol, info)


def verify_quantum_chain(
    c: QuantumChannel,
    code: EntGenCode,
    certificate: DegradabilityCertificate | None = None,
    tol: float = CHAIN_TOL,
    duality_tol: float = DUALITY_TOL,
    eps: float | None = None,
) -> ChainReport:
    """Recompute each inequality of the quantum-capacity converse on ``code``.

    Steps: correctness (``log N <= -H_max^eps(R|A)_xi``), decoder data
    processing, duality between ``B^n`` and ``E^n`` (two one-sided checks),
    degrading-map data processing, the uncertainty relation at ``(alpha, alpha)`` and the
    final bound ``2 log N <= log2(1/cos^2(2 alpha))``. ``eps`` optionally
    declares an error level at least the achieved one.
    """
    witness, cert = _antidegradable_witness(c, certificate)
    perf = eval_entgen(c, code)
    eps = _declared("eps", perf.eps, eps)
    if eps >= INV_SQRT2:
        raise ConverseDomainError(f"achieved eps = {eps:.6g} ≥ 1/√2")
    alpha = math.asin(eps)
    n, N = code.n, code.N
    el, bl = env_labels(n), out_labels(n)
    xi, sigma_rb, sigma_re = perf.states["xi_AR"], perf.states["sigma_RB"], perf.states["sigma_RE"]
    log_n = math.log2(N)

    hmax_a = h_max_smooth(xi, ["R"], ["A"], eps)
    hmax_b = h_max_smooth(sigma_rb, ["R"], bl, eps)
    hmin_e = h_min_smooth(sigma_re, ["R"], el, eps)
    degraded = _degrade(witness, sigma_re, n, sigma_re.layout.total // N, "R", N, False)
    hmin_b_degraded = h_min_smooth(degraded, ["R"], bl, eps)
    hmin_b = h_min_smooth(sigma_rb, ["R"], bl, eps)
    gap = lemma1_gap(alpha, alpha)
    steps = [
        ChainStep("correctness", log_n, -hmax_a, tol),
        ChainStep("decoding", -hmax_a, -hmax_b, tol),
        ChainStep("duality_le", -hmax_b, hmin_e, duality_tol),
        ChainStep("duality_ge", hmin_e, -hmax_b, duality_tol),
        ChainStep("degrading_map", hmin_e, hmin_b_degraded, tol),
        ChainStep("lemma1", hmin_b, hmax_b + gap, tol),
        ChainStep("bound", 2.0 * log_n, gap, tol),
    ]
    info = {
        "eps": eps,
        "achieved_eps": perf.eps,
        "alpha": alpha,
        "n": n,
        "N": N,
        "certificate_residual": cert.residual,
        "degraded_state_deviation": float(abs(degraded.matrix - sigma_rb.matrix).max()),
    }
    return ChainReport("quantum", steps, tol, info)
