"""Quantum channels in Kraus form, with Choi and Stinespring views.

Conventions
-----------
* Choi matrix on ``out (x) in``: ``J = sum_ij N(|i><j|) (x) |i><j|``, so the
  partial trace over the output is the identity on the input.
* Stinespring isometry ``V|phi> = sum_i (K_i|phi>) (x) |i>_E`` with the
  output system first; the complementary channel swaps the two legs.
* Erasure keeps the input space and appends one flag level as the last
  basis vector. Its Kraus list puts the flag operators first and the
  embedding last, which makes ``complementary(erasure(p))`` equal to
  ``erasure(1 - p)`` exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._config import TP_TOL, check_dim
from .linalg import DensityState, eigh_h

ISOMETRY_TOL = 1e-10


class ChannelError(ValueError):
    """Invalid channel data or incompatible dimensions."""


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """CPTP map ``C^in_dim -> C^out_dim`` given by its Kraus operators."""

    kraus: tuple[np.ndarray, ...]

    def __init__(self, kraus: Sequence[np.ndarray], tol: float = TP_TOL):
        ops = [np.array(k, dtype=complex) for k in kraus]
        if not ops:
            raise ChannelError("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if len(shape) != 2 or any(k.shape != shape for k in ops):
            raise ChannelError("Kraus operators must be matrices of a common shape")
        check_dim(max(shape), "channel dimension")
        check_dim(len(ops), "environment dimension")
        gram = sum(k.conj().T @ k for k in ops)
        err = float(np.max(np.abs(gram - np.eye(shape[1]))))
        if err > tol:
            raise ChannelError(f"Kraus set is not trace preserving (deviation {err:.3e})")
        for k in ops:
            k.flags.writeable = False
        object.__setattr__(self, "kraus", tuple(ops))

    @property
    def in_dim(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.kraus[0].shape[0]

    @property
    def env_dim(self) -> int:
        return len(self.kraus)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Action on a raw ``in_dim x in_dim`` matrix (need not be a state)."""
        rho = np.asarray(rho)
        if rho.shape != (self.in_dim, self.in_dim):
            raise ChannelError(f"input of shape {rho.shape} for in_dim {self.in_dim}")
        k = np.stack(self.kraus)
        return np.einsum("kab,bc,kdc->ad", k, rho, k.conj())

    def apply_on(self, rho: np.ndarray, dims: Sequence[int], index: int) -> np.ndarray:
        """Act on tensor factor ``index`` of a matrix on ``prod(dims)``."""
        dims = list(dims)
        if dims[index] != self.in_dim:
            raise ChannelError(f"factor {index} has dimension {dims[index]}, channel expects {self.in_dim}")
        n = len(dims)
        t = np.asarray(rho).reshape(dims + dims)
        k = np.stack(self.kraus)
        t = np.tensordot(k, t, axes=([2], [index]))          # k, out, rest...
        t = np.moveaxis(t, 1, index + 1)
        t = np.tensordot(t, k.conj(), axes=([0, n + index + 1], [0, 2]))
        t = np.moveaxis(t, -1, n + index)
        out = dims.copy()
        out[index] = self.out_dim
        d = math.prod(out)
        return t.reshape(d, d)

    def __call__(self, state: DensityState) -> DensityState:
        if len(state.layout.subsystems) != 1:
            raise ChannelError("use apply_on/apply_to for multi-system states")
        label = state.layout.labels[0]
        return DensityState([(label, self.out_dim)], self.apply(state.matrix))


def apply_to(channel: QuantumChannel, state: DensityState, label: str, new_label: str | None = None) -> DensityState:
    """Apply ``channel`` to subsystem ``label`` of a labelled state."""
    idx = state.layout.index(label)
    m = channel.apply_on(state.matrix, state.layout.dims, idx)
    subs = list(state.layout.subsystems)
    subs[idx] = (new_label or label, channel.out_dim)
    return DensityState(subs, m)


@dataclass(frozen=True, eq=False)
class ChoiMatrix:
    """Choi matrix on ``out (x) in`` together with its dimensions."""

    in_dim: int
    out_dim: int
    matrix: np.ndarray

    def check(self, tol: float = TP_TOL) -> None:
        d = self.in_dim * self.out_dim
        if self.matrix.shape != (d, d):
            raise ChannelError("Choi matrix shape mismatch")
        if np.max(np.abs(self.matrix - self.matrix.conj().T)) > tol:
            raise ChannelError("Choi matrix is not Hermitian")
        w = eigh_h(self.matrix)[0]
        if w[0] < -tol:
            raise ChannelError(f"Choi matrix not CP (min eigenvalue {w[0]:.3e})")
        tp = choi_input_marginal(self.matrix, self.in_dim, self.out_dim)
        err = float(np.max(np.abs(tp - np.eye(self.in_dim))))
        if err > tol:
            raise ChannelError(f"Choi matrix not TP (deviation {err:.3e})")


@dataclass(frozen=True, eq=False)
class StinespringIsometry:
    """Isometry ``in -> out (x) env`` as an ``(out*env) x in`` matrix."""

    matrix: np.ndarray
    out_dim: int
    env_dim: int

    def check(self, tol: float = ISOMETRY_TOL) -> float:
        err = float(np.linalg.norm(self.matrix.conj().T @ self.matrix - np.eye(self.matrix.shape[1]), 2))
        if err > tol:
            raise ChannelError(f"not an isometry (deviation {err:.3e})")
        return err


# ---------------------------------------------------------------------------
# channel zoo


def _check_prob(name: str, p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ChannelError(f"{name} must lie in [0, 1], got {p}")
    return p


def identity(d: int = 2) -> QuantumChannel:
    if d < 1:
        raise ChannelError("dimension must be at least 1")
    return QuantumChannel([np.eye(d)])


def erasure(p: float, d: int = 2) -> QuantumChannel:
    """Erasure with probability ``p``; output space is the input plus a last flag level."""
    p = _check_prob("erasure probability", p)
    ops = []
    for i in range(d):
        k = np.zeros((d + 1, d))
        k[d, i] = math.sqrt(p)
        ops.append(k)
    emb = np.zeros((d + 1, d))
    emb[:d, :d] = math.sqrt(1 - p) * np.eye(d)
    ops.append(emb)
    return QuantumChannel(ops)


def amplitude_damping(g: float) -> QuantumChannel:
    """Qubit amplitude damping with decay probability ``g``."""
    g = _check_prob("damping parameter", g)
    k0 = np.array([[1.0, 0.0], [0.0, math.sqrt(1 - g)]])
    k1 = np.array([[0.0, math.sqrt(g)], [0.0, 0.0]])
    return QuantumChannel([k0, k1])


def _weyl(d: int) -> list[np.ndarray]:
    omega = np.exp(2j * np.pi / d)
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(omega ** np.arange(d))
    return [np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b) for a in range(d) for b in range(d)]


def depolarizing(p: float, d: int = 2) -> QuantumChannel:
    """``rho -> (1-p) rho + p Tr(rho) I/d``; ``p = 1`` replaces every input by ``I/d``."""
    p = _check_prob("depolarizing parameter", p)
    ws = _weyl(d)
    ops = [math.sqrt(1 - p + p / d**2) * ws[0]]
    ops += [math.sqrt(p) / d * w for w in ws[1:]]
    return QuantumChannel(ops)


def from_kraus(ops: Sequence[np.ndarray]) -> QuantumChannel:
    return QuantumChannel(ops)


def make_channel(kind: str, **params) -> QuantumChannel:
    """Build a zoo channel by name: erasure, depolarizing, amplitude_damping, identity, from_kraus."""
    if kind == "erasure":
        return erasure(params["p"], params.get("d", 2))
    if kind == "depolarizing":
        return depolarizing(params["p"], params.get("d", 2))
    if kind == "amplitude_damping":
        return amplitude_damping(params.get("g", params.get("p")))
    if kind == "identity":
        return identity(params.get("d", 2))
    if kind == "from_kraus":
        return from_kraus(params["kraus"])
    raise ChannelError(f"unknown channel kind {kind!r}")


def random_channel(in_dim: int, out_dim: int, rng: np.random.Generator, env_dim: int | None = None) -> QuantumChannel:
    """Channel from a Haar-random isometry ``in -> out (x) env``."""
    env = env_dim or in_dim * out_dim
    g = rng.standard_normal((out_dim * env, in_dim)) + 1j * rng.standard_normal((out_dim * env, in_dim))
    q, _ = np.linalg.qr(g)
    v = q.reshape(out_dim, env, in_dim)
    return QuantumChannel([v[:, i, :] for i in range(env)])


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# ---------------------------------------------------------------------------
# representations


def choi_input_marginal(j: np.ndarray, in_dim: int, out_dim: int) -> np.ndarray:
    """``Tr_out J``; equals the identity for a trace-preserving map."""
    return np.einsum("aiaj->ij", j.reshape(out_dim, in_dim, out_dim, in_dim))


def to_choi(c: QuantumChannel) -> ChoiMatrix:
    vecs = np.stack([k.reshape(-1) for k in c.kraus], axis=1)
    return ChoiMatrix(c.in_dim, c.out_dim, vecs @ vecs.conj().T)


def from_choi(j: ChoiMatrix, tol: float = TP_TOL) -> QuantumChannel:
    """Kraus operators from the eigenvectors of ``J``; Kraus count equals the Choi rank."""
    j.check(tol)
    w, v = eigh_h(j.matrix)
    keep = w > tol
    if not np.any(keep):
        raise ChannelError("Choi matrix is zero")
    ops = [math.sqrt(wi) * v[:, i].reshape(j.out_dim, j.in_dim) for i, wi in zip(np.flatnonzero(keep), w[keep])]
    return QuantumChannel(ops, tol=max(tol, 1e-9))


def choi_apply(j: np.ndarray, rho: np.ndarray, in_dim: int, out_dim: int) -> np.ndarray:
    """``N(rho) = Tr_in[J (I (x) rho^T)]``."""
    t = j.reshape(out_dim, in_dim, out_dim, in_dim)
    return np.einsum("aibj,ij->ab", t, rho)


def stinespring(c: QuantumChannel) -> StinespringIsometry:
    v = np.stack(c.kraus, axis=1)  # out, env, in
    return StinespringIsometry(v.reshape(c.out_dim * c.env_dim, c.in_dim), c.out_dim, c.env_dim)


def complementary(c: QuantumChannel) -> QuantumChannel:
    """Channel to the environment; Kraus ``(K_c)_b[i, :] = K_i[b, :]``."""
    k = np.stack(c.kraus)  # env, out, in
    return QuantumChannel([k[:, b, :] for b in range(c.out_dim)])


def compose(outer: QuantumChannel, inner: QuantumChannel) -> QuantumChannel:
    """``outer o inner`` (``inner`` acts first)."""
    if inner.out_dim != outer.in_dim:
        raise ChannelError(f"cannot compose: inner outputs {inner.out_dim}, outer expects {outer.in_dim}")
    return QuantumChannel([f @ g for f in outer.kraus for g in inner.kraus])


def tensor(a: QuantumChannel, b: QuantumChannel) -> QuantumChannel:
    check_dim(a.in_dim * b.in_dim, "input dimension")
    check_dim(a.out_dim * b.out_dim, "output dimension")
    check_dim(a.env_dim * b.env_dim, "environment dimension")
    return QuantumChannel([np.kron(x, y) for x in a.kraus for y in b.kraus])


def tensor_power(c: QuantumChannel, n: int) -> QuantumChannel:
    if n < 1:
        raise ChannelError("tensor power needs n >= 1")
    for what, d in (("input", c.in_dim), ("output", c.out_dim), ("environment", c.env_dim)):
        check_dim(d**n, f"{what} dimension")
    out = c
    for _ in range(n - 1):
        out = tensor(out, c)
    return out


def spanning_inputs(d: int) -> list[np.ndarray]:
    """Matrix units ``|i><j|``; a channel is fixed by its action on them."""
    units = []
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            units.append(e)
    return units


def action_distance(a: QuantumChannel, b: QuantumChannel) -> float:
    """Max entrywise deviation of the two actions over the matrix-unit basis."""
    if (a.in_dim, a.out_dim) != (b.in_dim, b.out_dim):
        raise ChannelError("channels have different dimensions")
    return max(float(np.max(np.abs(a.apply(e) - b.apply(e)))) for e in spanning_inputs(a.in_dim))


# ---------------------------------------------------------------------------
# JSON


def _encode(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def channel_to_dict(c: QuantumChannel) -> dict:
    return {"in_dim": c.in_dim, "out_dim": c.out_dim, "kraus": [_encode(k) for k in c.kraus]}


def channel_from_dict(data: dict) -> QuantumChannel:
    """Parse either explicit Kraus data or zoo shorthand such as ``{"kind": "erasure", "p": 0.5}``."""
    if "kind" in data:
        params = {k: v for k, v in data.items() if k != "kind"}
        return make_channel(data["kind"], **params)
    din, dout = int(data["in_dim"]), int(data["out_dim"])
    ops = []
    for raw in data["kraus"]:
        arr = np.asarray(raw, dtype=float)
        if arr.shape == (dout * din, 2):
            arr = arr.reshape(dout, din, 2)
        if arr.shape != (dout, din, 2):
            raise ChannelError(f"Kraus operator data of shape {arr.shape}, expected ({dout}, {din}, 2)")
        ops.append(arr[..., 0] + 1j * arr[..., 1])
    return QuantumChannel(ops)


def channel_to_json(c: QuantumChannel) -> str:
    return json.dumps(channel_to_dict(c))


def channel_from_json(text: str) -> QuantumChannel:
    return channel_from_dict(json.loads(text))
