"""Dense Hermitian linear algebra on labelled tensor-product spaces.

Every matrix function (square roots, absolute values, entropies) goes
through :func:`eigh_h`, the single numerical kernel of the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._config import PSD_TOL, check_dim


class LayoutError(ValueError):
    """Unknown, duplicate or colliding subsystem labels."""


class StateError(ValueError):
    """A matrix or vector failed a state invariant."""


# ---------------------------------------------------------------------------
# numerical kernel


def eigh_h(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of the Hermitian part of ``m``."""
    m = np.asarray(m)
    return np.linalg.eigh((m + m.conj().T) / 2)


def herm_fn(m: np.ndarray, fn) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its spectrum."""
    w, v = eigh_h(m)
    return (v * fn(w)) @ v.conj().T


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    return herm_fn(m, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def trace_norm(m: np.ndarray) -> float:
    """``Tr|m|`` for Hermitian ``m``."""
    return float(np.sum(np.abs(eigh_h(m)[0])))


def fidelity_matrices(r: np.ndarray, s: np.ndarray) -> float:
    """``||sqrt(r) sqrt(s)||_1`` for PSD matrices (no normalisation assumed).

    Summing singular values of the product (rather than square roots of the
    eigenvalues of ``sqrt(r) s sqrt(r)``) keeps the result symmetric in its
    arguments to rounding level for rank-deficient inputs.
    """
    return float(np.sum(np.linalg.svd(sqrtm_psd(r) @ sqrtm_psd(s), compute_uv=False)))


# ---------------------------------------------------------------------------
# layouts and states


@dataclass(frozen=True)
class SystemLayout:
    """Ordered tensor factors, each a ``(label, dimension)`` pair."""

    subsystems: tuple[tuple[str, int], ...]

    def __init__(self, subsystems: Iterable[Sequence]):
        subs = tuple((str(lab), int(dim)) for lab, dim in subsystems)
        labels = [lab for lab, _ in subs]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate labels in {labels}")
        for lab, dim in subs:
            if dim < 1:
                raise LayoutError(f"subsystem {lab!r} has dimension {dim}")
        object.__setattr__(self, "subsystems", subs)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.subsystems)

    @property
    def total(self) -> int:
        return math.prod(self.dims)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown label {label!r}; layout has {self.labels}") from None

    def dim_of(self, labels: Iterable[str]) -> int:
        return math.prod(self.dims[self.index(lab)] for lab in labels)

    def subset(self, labels: Iterable[str]) -> "SystemLayout":
        wanted = set(labels)
        for lab in wanted:
            self.index(lab)
        return SystemLayout([(lab, d) for lab, d in self.subsystems if lab in wanted])

    def __add__(self, other: "SystemLayout") -> "SystemLayout":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise LayoutError(f"label collision: {sorted(clash)}")
        return SystemLayout(self.subsystems + other.subsystems)


def _as_layout(layout) -> SystemLayout:
    return layout if isinstance(layout, SystemLayout) else SystemLayout(layout)


@dataclass(frozen=True, eq=False)
class DensityState:
    """A (possibly sub-normalised) PSD operator on a labelled space.

    Construction validates Hermiticity, positivity (min eigenvalue
    >= -1e-10) and ``0 < trace <= 1``. Invalid matrices are rejected.
    """

    layout: SystemLayout
    matrix: np.ndarray

    def __init__(self, layout, matrix):
        layout = _as_layout(layout)
        m = np.array(matrix, dtype=complex)
        d = layout.total
        check_dim(d, "state dimension")
        if m.shape != (d, d):
            raise StateError(f"matrix shape {m.shape} does not match layout dimension {d}")
        scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
        if np.max(np.abs(m - m.conj().T)) > PSD_TOL * scale:
            raise StateError("matrix is not Hermitian")
        m = (m + m.conj().T) / 2
        w = np.linalg.eigvalsh(m)
        if w[0] < -PSD_TOL:
            raise StateError(f"matrix is not PSD (min eigenvalue {w[0]:.3e})")
        tr = float(np.trace(m).real)
        if tr > 1 + PSD_TOL:
            raise StateError(f"trace {tr!r} exceeds 1")
        if tr <= 0:
            raise StateError("trace must be positive")
        m.flags.writeable = False
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "matrix", m)

    @property
    def normalization(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def is_normalized(self) -> bool:
        return abs(self.normalization - 1.0) <= PSD_TOL

    @property
    def labels(self) -> tuple[str, ...]:
        return self.layout.labels

    def eigenvalues(self) -> np.ndarray:
        return eigh_h(self.matrix)[0]

    def relabel(self, mapping: dict[str, str]) -> "DensityState":
        subs = [(mapping.get(lab, lab), d) for lab, d in self.layout.subsystems]
        return DensityState(subs, self.matrix)

    def __repr__(self) -> str:
        return f"DensityState({list(self.layout.subsystems)}, trace={self.normalization:.6g})"


@dataclass(frozen=True, eq=False)
class PureState:
    """A unit vector on a labelled space."""

    layout: SystemLayout
    amplitudes: np.ndarray

    def __init__(self, layout, amplitudes):
        layout = _as_layout(layout)
        v = np.array(amplitudes, dtype=complex).reshape(-1)
        if v.size != layout.total:
            raise StateError(f"{v.size} amplitudes for layout dimension {layout.total}")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > 1e-12:
            raise StateError(f"amplitude vector has norm {norm!r}")
        v.flags.writeable = False
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "amplitudes", v)

    def density(self) -> DensityState:
        return DensityState(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()))


# ---------------------------------------------------------------------------
# constructors


def basis_state(layout, index) -> DensityState:
    """``|index><index|``; ``index`` is a flat index or one digit per subsystem."""
    layout = _as_layout(layout)
    if not isinstance(index, (int, np.integer)):
        index = int(np.ravel_multi_index(tuple(index), layout.dims))
    m = np.zeros((layout.total, layout.total), dtype=complex)
    m[index, index] = 1.0
    return DensityState(layout, m)


def maximally_mixed(layout) -> DensityState:
    layout = _as_layout(layout)
    return DensityState(layout, np.eye(layout.total) / layout.total)


def maximally_entangled(labels: tuple[str, str], d: int) -> PureState:
    """``sum_i |ii> / sqrt(d)`` on two ``d``-dimensional systems."""
    v = np.eye(d).reshape(-1) / math.sqrt(d)
    return PureState([(labels[0], d), (labels[1], d)], v)


def classical_correlated(labels: tuple[str, str], m: int) -> DensityState:
    """``sum_m |m><m| (x) |m><m| / M``, the ideal message/record state."""
    diag = np.eye(m).reshape(-1) / m
    return DensityState([(labels[0], m), (labels[1], m)], np.diag(diag))


def random_density(layout, rng: np.random.Generator, rank: int | None = None) -> DensityState:
    """Random normalised state from a Ginibre matrix (Hilbert-Schmidt measure at full rank)."""
    layout = _as_layout(layout)
    d = layout.total
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    m = g @ g.conj().T
    return DensityState(layout, m / np.trace(m).real)


def random_pure(layout, rng: np.random.Generator) -> PureState:
    layout = _as_layout(layout)
    v = rng.standard_normal(layout.total) + 1j * rng.standard_normal(layout.total)
    return PureState(layout, v / np.linalg.norm(v))


# ---------------------------------------------------------------------------
# structural operations


def tensor_product(a: DensityState, b: DensityState) -> DensityState:
    layout = a.layout + b.layout
    return DensityState(layout, np.kron(a.matrix, b.matrix))


def _reduce(matrix: np.ndarray, dims: tuple[int, ...], keep_idx: list[int]) -> np.ndarray:
    n = len(dims)
    t = matrix.reshape(dims + dims)
    drop = [i for i in range(n) if i not in keep_idx]
    row = [chr(97 + i) for i in range(n)]
    col = [chr(97 + n + i) for i in range(n)]
    for i in drop:
        col[i] = row[i]
    out = [row[i] for i in keep_idx] + [col[i] for i in keep_idx]
    t = np.einsum("".join(row) + "".join(col) + "->" + "".join(out), t)
    dk = math.prod(dims[i] for i in keep_idx)
    return t.reshape(dk, dk)


def partial_trace(s, keep: Iterable[str]) -> DensityState:
    """Trace out every subsystem not in ``keep``; kept factors retain layout order.

    Accepts a :class:`PureState` as well, without forming its full density matrix.
    """
    keep = set(keep)
    if not keep:
        raise LayoutError("keep must name at least one subsystem")
    for lab in keep:
        s.layout.index(lab)
    keep_idx = [i for i, lab in enumerate(s.layout.labels) if lab in keep]
    dims = s.layout.dims
    new_layout = SystemLayout([s.layout.subsystems[i] for i in keep_idx])
    if isinstance(s, PureState):
        t = s.amplitudes.reshape(dims)
        drop = [i for i in range(len(dims)) if i not in keep_idx]
        t = np.transpose(t, keep_idx + drop).reshape(new_layout.total, -1)
        return DensityState(new_layout, t @ t.conj().T)
    return DensityState(new_layout, _reduce(s.matrix, dims, keep_idx))


def permute(s: DensityState, order: Sequence[str]) -> DensityState:
    """Reorder tensor factors explicitly; ``order`` must list every label once."""
    if sorted(order) != sorted(s.layout.labels) or len(order) != len(s.layout.labels):
        raise LayoutError(f"order {list(order)} is not a permutation of {s.layout.labels}")
    perm = [s.layout.index(lab) for lab in order]
    n = len(perm)
    dims = s.layout.dims
    t = s.matrix.reshape(dims + dims).transpose(perm + [p + n for p in perm])
    layout = SystemLayout([s.layout.subsystems[p] for p in perm])
    return DensityState(layout, t.reshape(layout.total, layout.total))


def _same_layout(r: DensityState, s: DensityState) -> None:
    if r.layout != s.layout:
        raise LayoutError(f"layout mismatch: {r.layout.subsystems} vs {s.layout.subsystems}")


# ---------------------------------------------------------------------------
# distances


def fidelity(r: DensityState, s: DensityState) -> float:
    """Generalised fidelity ``||sqrt(r)sqrt(s)||_1 + sqrt((1-Tr r)(1-Tr s))``."""
    _same_layout(r, s)
    f = fidelity_matrices(r.matrix, s.matrix)
    f += math.sqrt(max(0.0, 1 - r.normalization) * max(0.0, 1 - s.normalization))
    return min(1.0, max(0.0, f))


def trace_distance(r: DensityState, s: DensityState) -> float:
    _same_layout(r, s)
    return min(1.0, 0.5 * trace_norm(r.matrix - s.matrix))


def purified_distance(r: DensityState, s: DensityState) -> float:
    f = fidelity(r, s)
    return math.sqrt(max(0.0, 1.0 - f * f))


# ---------------------------------------------------------------------------
# purification


def purify(s: DensityState, new_label: str, cutoff: float = 1e-12) -> PureState:
    """Canonical purification ``sum_i sqrt(l_i)|e_i>|i>`` with purifier dimension = rank."""
    if not s.is_normalized:
        raise StateError("purify requires a normalised state")
    if new_label in s.layout.labels:
        raise LayoutError(f"label collision: {new_label!r}")
    w, v = eigh_h(s.matrix)
    sel = w > cutoff
    if not np.any(sel):
        sel[-1] = True
    w, v = w[sel], v[:, sel]
    amps = v * np.sqrt(w)
    amps /= np.linalg.norm(amps)
    layout = s.layout + SystemLayout([(new_label, int(w.size))])
    return PureState(layout, amps.reshape(-1))


# ---------------------------------------------------------------------------
# JSON


def _encode_matrix(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _decode_matrix(data, d: int) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 2 and arr.shape == (d * d, 2):
        arr = arr.reshape(d, d, 2)
    if arr.shape != (d, d, 2):
        raise StateError(f"matrix data of shape {arr.shape} does not match dimension {d}")
    return arr[..., 0] + 1j * arr[..., 1]


def state_to_dict(s: DensityState) -> dict:
    return {
        "subsystems": [[lab, d] for lab, d in s.layout.subsystems],
        "matrix": _encode_matrix(s.matrix),
    }


def state_from_dict(data: dict) -> DensityState:
    layout = SystemLayout(data["subsystems"])
    return DensityState(layout, _decode_matrix(data["matrix"], layout.total))


def state_to_json(s: DensityState) -> str:
    return json.dumps(state_to_dict(s))


def state_from_json(text: str) -> DensityState:
    return state_from_dict(json.loads(text))
