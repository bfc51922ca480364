"""Dense SDP problems over Hermitian / real-symmetric blocks.

Variables are stored in orthonormal real coordinates:

* ``herm`` block of size n: n**2 coordinates -- the diagonal, then
  ``sqrt(2) Re X_ij`` and ``sqrt(2) Im X_ij`` for ``i < j`` (row-major pairs).
* ``sym`` block of size n: n(n+1)/2 coordinates -- the diagonal, then
  ``sqrt(2) X_ij`` for ``i < j``.

With these, ``Re Tr(C X)`` is a plain dot product, so constraints and the
objective are rows of a dense real matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

SQRT2 = math.sqrt(2.0)
KINDS = ("sym", "herm")


@lru_cache(maxsize=None)
def _pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, 1)


def dof(n: int, kind: str) -> int:
    return n * n if kind == "herm" else n * (n + 1) // 2


def hvec(m: np.ndarray) -> np.ndarray:
    """Coordinates of a Hermitian matrix (or a stack ``(..., n, n)``)."""
    m = np.asarray(m)
    n = m.shape[-1]
    iu, ju = _pairs(n)
    diag = np.real(np.diagonal(m, axis1=-2, axis2=-1))
    off = m[..., iu, ju]
    return np.concatenate([diag, SQRT2 * off.real, SQRT2 * off.imag], axis=-1)


def hmat(h: np.ndarray, n: int) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    iu, ju = _pairs(n)
    p = iu.size
    m = np.zeros(h.shape[:-1] + (n, n), dtype=complex)
    idx = np.arange(n)
    m[..., idx, idx] = h[..., :n]
    off = (h[..., n : n + p] + 1j * h[..., n + p :]) / SQRT2
    m[..., iu, ju] = off
    m[..., ju, iu] = off.conj()
    return m


def svec(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    n = m.shape[-1]
    iu, ju = _pairs(n)
    diag = np.real(np.diagonal(m, axis1=-2, axis2=-1))
    return np.concatenate([diag, SQRT2 * np.real(m[..., iu, ju])], axis=-1)


def smat(h: np.ndarray, n: int) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    iu, ju = _pairs(n)
    m = np.zeros(h.shape[:-1] + (n, n))
    idx = np.arange(n)
    m[..., idx, idx] = h[..., :n]
    m[..., iu, ju] = h[..., n:] / SQRT2
    m[..., ju, iu] = h[..., n:] / SQRT2
    return m


def to_coords(m: np.ndarray, kind: str) -> np.ndarray:
    return hvec(m) if kind == "herm" else svec(m)


def from_coords(h: np.ndarray, n: int, kind: str) -> np.ndarray:
    return hmat(h, n) if kind == "herm" else smat(h, n)


def basis(n: int, kind: str) -> np.ndarray:
    """Stack of the orthonormal basis matrices, shape ``(dof, n, n)``."""
    return from_coords(np.eye(dof(n, kind)), n, kind)


@dataclass(frozen=True)
class Block:
    dim: int
    kind: str = "herm"

    @property
    def dof(self) -> int:
        return dof(self.dim, self.kind)


# ---------------------------------------------------------------------------
# affine expressions


class Affine:
    """Hermitian-matrix-valued affine function of the problem's blocks.

    ``terms[b]`` maps block ``b``'s coordinates to the output's Hermitian
    coordinates; ``const`` is a fixed Hermitian matrix.
    """

    def __init__(self, problem: "SdpProblem", dim: int, terms: dict[int, np.ndarray], const: np.ndarray | None = None):
        self.problem = problem
        self.dim = dim
        self.terms = terms
        self.const = np.zeros((dim, dim), dtype=complex) if const is None else np.asarray(const, dtype=complex)

    def _combine(self, other, sign: float) -> "Affine":
        if isinstance(other, Affine):
            if other.dim != self.dim:
                raise ValueError(f"dimension mismatch {self.dim} vs {other.dim}")
            terms = {b: t.copy() for b, t in self.terms.items()}
            for b, t in other.terms.items():
                terms[b] = terms[b] + sign * t if b in terms else sign * t
            return Affine(self.problem, self.dim, terms, self.const + sign * other.const)
        other = np.asarray(other, dtype=complex)
        if other.shape != (self.dim, self.dim):
            raise ValueError("constant has the wrong shape")
        return Affine(self.problem, self.dim, dict(self.terms), self.const + sign * other)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-1.0 * self)._combine(other, 1.0)

    __radd__ = __add__

    def __mul__(self, k: float) -> "Affine":
        k = float(k)
        return Affine(self.problem, self.dim, {b: k * t for b, t in self.terms.items()}, k * self.const)

    __rmul__ = __mul__

    def linmap(self, fn, out_dim: int) -> "Affine":
        """Compose with a Hermiticity-preserving linear map.

        ``fn`` must accept a stack ``(k, dim, dim)`` and return ``(k, out_dim, out_dim)``.
        """
        terms = {}
        for b, t in self.terms.items():
            mats = hmat(t.T, self.dim)
            terms[b] = hvec(fn(mats)).T
        const = fn(self.const[None])[0]
        return Affine(self.problem, out_dim, terms, const)

    def kron_left(self, d: int) -> "Affine":
        """``I_d (x) X``."""
        eye = np.eye(d)
        return self.linmap(lambda m: np.einsum("ij,kab->kiajb", eye, m).reshape(m.shape[0], d * self.dim, d * self.dim), d * self.dim)

    def kron_right(self, d: int) -> "Affine":
        """``X (x) I_d``."""
        eye = np.eye(d)
        return self.linmap(lambda m: np.einsum("kab,ij->kaibj", m, eye).reshape(m.shape[0], d * self.dim, d * self.dim), d * self.dim)

    def block(self, start: int, stop: int) -> "Affine":
        """Diagonal sub-block ``X[start:stop, start:stop]``."""
        return self.linmap(lambda m: m[:, start:stop, start:stop], stop - start)

    def trace(self) -> "Scalar":
        return self.inner(np.eye(self.dim))

    def inner(self, c: np.ndarray) -> "Scalar":
        """``Re Tr(C X)`` for a fixed (not necessarily Hermitian) matrix ``C``."""
        c = np.asarray(c, dtype=complex)
        ch = hvec((c + c.conj().T) / 2)
        terms = {b: ch @ t for b, t in self.terms.items()}
        return Scalar(self.problem, terms, float(np.real(np.trace(c @ self.const))))


class Scalar:
    """Real affine function of the blocks."""

    def __init__(self, problem: "SdpProblem", terms: dict[int, np.ndarray], const: float = 0.0):
        self.problem = problem
        self.terms = terms
        self.const = float(const)

    def _combine(self, other, sign: float) -> "Scalar":
        if isinstance(other, Scalar):
            terms = {b: t.copy() for b, t in self.terms.items()}
            for b, t in other.terms.items():
                terms[b] = terms[b] + sign * t if b in terms else sign * t
            return Scalar(self.problem, terms, self.const + sign * other.const)
        return Scalar(self.problem, dict(self.terms), self.const + sign * float(other))

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-1.0 * self)._combine(other, 1.0)

    __radd__ = __add__

    def __mul__(self, k: float) -> "Scalar":
        k = float(k)
        return Scalar(self.problem, {b: k * t for b, t in self.terms.items()}, k * self.const)

    __rmul__ = __mul__

    def __neg__(self):
        return -1.0 * self


# ---------------------------------------------------------------------------
# problem


@dataclass
class SdpProblem:
    """``minimize sum_b <C_b, Z_b>`` subject to linear constraints, every ``Z_b >= 0``.

    Constraints are kept as coordinate rows per block. ``add_equality`` and
    ``add_inequality`` take the textbook form (one Hermitian coefficient
    matrix per block and a real right-hand side); the ``constrain_*`` helpers
    take :class:`Affine` / :class:`Scalar` expressions.
    """

    blocks: list[Block] = field(default_factory=list)
    objective: dict[int, np.ndarray] = field(default_factory=dict)
    objective_const: float = 0.0
    sense: str = "min"
    equalities: list[tuple[dict[int, np.ndarray], np.ndarray]] = field(default_factory=list)
    inequalities: list[tuple[dict[int, np.ndarray], float, str]] = field(default_factory=list)
    names: dict[str, int] = field(default_factory=dict)

    # -- variables ---------------------------------------------------------
    def add_block(self, dim: int, kind: str = "herm", name: str | None = None) -> Affine:
        if kind not in KINDS:
            raise ValueError(f"block kind must be one of {KINDS}")
        if dim < 1:
            raise ValueError("block dimension must be positive")
        self.blocks.append(Block(int(dim), kind))
        b = len(self.blocks) - 1
        if name is not None:
            self.names[name] = b
        return self.variable(b)

    def variable(self, b: int) -> Affine:
        blk = self.blocks[b]
        if blk.kind == "herm":
            t = np.eye(blk.dof)
        else:
            # sym coordinates embed into herm coordinates with zero imaginary parts
            n = blk.dim
            t = np.zeros((n * n, blk.dof))
            t[: blk.dof, :] = np.eye(blk.dof)
        return Affine(self, blk.dim, {b: t})

    # -- textbook-form constraints ------------------------------------------
    def _coef_rows(self, coeffs: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
        rows = {}
        for b, cmat in coeffs.items():
            blk = self.blocks[b]
            cmat = np.asarray(cmat)
            if cmat.shape != (blk.dim, blk.dim):
                raise ValueError(f"coefficient for block {b} has shape {cmat.shape}")
            if np.max(np.abs(cmat - cmat.conj().T), initial=0.0) > 1e-12:
                raise ValueError("coefficient matrices must be Hermitian")
            rows[b] = to_coords(cmat, blk.kind)[None, :]
        return rows

    def add_equality(self, coeffs: dict[int, np.ndarray], rhs: float) -> None:
        """``sum_b <A_b, Z_b> = rhs``."""
        self.equalities.append((self._coef_rows(coeffs), np.array([float(rhs)])))

    def add_inequality(self, coeffs: dict[int, np.ndarray], rhs: float, sense: str = "<=") -> None:
        if sense not in ("<=", ">="):
            raise ValueError("sense must be '<=' or '>='")
        rows = {b: r[0] for b, r in self._coef_rows(coeffs).items()}
        self.inequalities.append((rows, float(rhs), sense))

    def set_objective(self, coeffs: dict[int, np.ndarray], sense: str = "min") -> None:
        self.objective = {b: r[0] for b, r in self._coef_rows(coeffs).items()}
        self.objective_const = 0.0
        self.sense = sense

    # -- expression constraints ---------------------------------------------
    def _block_rows(self, b: int, t: np.ndarray) -> np.ndarray:
        blk = self.blocks[b]
        return t if blk.kind == "herm" else t[:, : blk.dof] if t.shape[1] != blk.dof else t

    def constrain_eq(self, expr, rhs=0.0) -> None:
        if isinstance(expr, Scalar):
            rows = {b: np.atleast_2d(t) for b, t in expr.terms.items()}
            self.equalities.append((rows, np.array([float(rhs) - expr.const])))
            return
        rhs_m = np.zeros((expr.dim, expr.dim)) if np.isscalar(rhs) and rhs == 0 else np.asarray(rhs, dtype=complex)
        target = hvec(rhs_m - expr.const)
        self.equalities.append(({b: t for b, t in expr.terms.items()}, target))

    def constrain_le(self, expr: Scalar, value: float) -> None:
        self.inequalities.append((dict(expr.terms), float(value) - expr.const, "<="))

    def constrain_ge(self, expr: Scalar, value: float) -> None:
        self.inequalities.append((dict(expr.terms), float(value) - expr.const, ">="))

    def constrain_psd(self, expr: Affine, name: str | None = None) -> Affine:
        """Require ``expr >= 0`` through a fresh PSD block tied by equality."""
        z = self.add_block(expr.dim, "herm", name)
        self.constrain_eq(z - expr, 0.0)
        return z

    def minimize(self, expr: Scalar) -> None:
        self.objective = dict(expr.terms)
        self.objective_const = expr.const
        self.sense = "min"

    def maximize(self, expr: Scalar) -> None:
        self.objective = dict(expr.terms)
        self.objective_const = expr.const
        self.sense = "max"

    # -- compilation ---------------------------------------------------------
    def offsets(self) -> list[int]:
        out, acc = [], 0
        for blk in self.blocks:
            out.append(acc)
            acc += blk.dof
        return out

    def compile(self):
        """Standard form ``min c.x  s.t.  A x = b`` with slack scalars for inequalities.

        Returns ``(A, b, c, meta)`` where ``meta[k] = (offset, dim, kind_code)`` and
        kind codes are 0 = symmetric, 1 = Hermitian, 2 = nonnegative scalar.
        """
        offs = self.offsets()
        n_main = sum(blk.dof for blk in self.blocks)
        n_slack = len(self.inequalities)
        ncol = n_main + n_slack
        rows, rhs = [], []
        for terms, target in self.equalities:
            r = np.zeros((target.size, ncol))
            for b, t in terms.items():
                blk = self.blocks[b]
                r[:, offs[b] : offs[b] + blk.dof] += self._herm_to_block(b, np.atleast_2d(t))
            rows.append(r)
            rhs.append(target)
        for k, (terms, value, sense) in enumerate(self.inequalities):
            r = np.zeros((1, ncol))
            for b, t in terms.items():
                r[0, offs[b] : offs[b] + self.blocks[b].dof] += self._herm_to_block(b, np.atleast_2d(t))[0]
            r[0, n_main + k] = 1.0 if sense == "<=" else -1.0
            rows.append(r)
            rhs.append(np.array([value]))
        a = np.vstack(rows) if rows else np.zeros((0, ncol))
        bvec = np.concatenate(rhs) if rhs else np.zeros(0)
        c = np.zeros(ncol)
        sign = 1.0 if self.sense == "min" else -1.0
        for b, t in self.objective.items():
            c[offs[b] : offs[b] + self.blocks[b].dof] += sign * self._herm_to_block(b, np.atleast_2d(t))[0]
        meta = [(offs[i], blk.dim, 1 if blk.kind == "herm" else (2 if blk.dim == 1 else 0)) for i, blk in enumerate(self.blocks)]
        meta += [(n_main + k, 1, 2) for k in range(n_slack)]
        return a, bvec, c, np.array(meta, dtype=np.int64).reshape(-1, 3)

    def _herm_to_block(self, b: int, t: np.ndarray) -> np.ndarray:
        """Rows written against herm coordinates -> rows against the block's own coordinates."""
        blk = self.blocks[b]
        if t.shape[1] == blk.dof:
            return t
        if blk.kind == "sym" and t.shape[1] == blk.dim * blk.dim:
            return t[:, : blk.dof]
        raise ValueError(f"row width {t.shape[1]} does not fit block {b}")

    def to_json(self) -> str:
        """Debug dump; not a stable format."""
        a, b, c, meta = self.compile()
        return json.dumps(
            {
                "blocks": [[blk.dim, blk.kind] for blk in self.blocks],
                "sense": self.sense,
                "A": a.tolist(),
                "b": b.tolist(),
                "c": c.tolist(),
                "meta": meta.tolist(),
            }
        )


# ---------------------------------------------------------------------------
# fidelity epigraph


@dataclass
class FidelityBundle:
    """Handles returned by :func:`fidelity_epigraph`."""

    block: Affine | None  # None when a fixed operand vanishes and no block is needed
    r: Affine
    s: Affine
    re_tr_x: Scalar


def _support(m: np.ndarray, cutoff: float = 1e-12) -> np.ndarray | None:
    """Isometry onto the support of a PSD matrix, or None if it has full rank."""
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    keep = w > cutoff * max(1.0, float(w[-1]))
    if np.all(keep):
        return None
    if not np.any(keep):
        keep[-1] = True
    return v[:, keep]


def _vanishes(m: np.ndarray, cutoff: float = 1e-12) -> bool:
    return float(np.max(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2)))) <= cutoff


def _compress(problem: "SdpProblem", item, v: np.ndarray, dim: int):
    """``(V^dag item V, full-space handle)``; a free corner becomes its own PSD block."""
    squeeze = lambda m: v.conj().T @ m @ v
    if item is None:
        item = problem.add_block(dim, "herm")
    if isinstance(item, Affine):
        return item.linmap(squeeze, v.shape[1]), item
    item = np.asarray(item, dtype=complex)
    return squeeze(item), item


def fidelity_epigraph(problem: SdpProblem, r, s, dim: int | None = None) -> FidelityBundle:
    """Add ``[[r, X], [X^dag, s]] >= 0`` and return ``Re Tr X`` among the handles.

    ``r`` and ``s`` may be fixed matrices, :class:`Affine` expressions (tied to
    the corners by equality) or ``None`` (corner left free and exposed).
    Maximising ``Re Tr X`` gives the fidelity ``||sqrt(r) sqrt(s)||_1``.

    A rank-deficient fixed operand is compressed to its support first, using
    ``F(r, s) = F(V^dag r V, V^dag s V)`` for the support isometry ``V`` of
    ``r``. Without this the block has no strictly feasible point, which
    stalls both solvers. Both fixed operands are compressed in turn; a
    fixed operand that vanishes gives the constant 0.
    """
    if dim is None:
        for item in (r, s):
            if isinstance(item, Affine):
                dim = item.dim
            elif item is not None:
                dim = np.asarray(item).shape[0]
    if dim is None:
        raise ValueError("dimension of the fidelity block is undetermined")
    for item in (r, s):
        size = item.dim if isinstance(item, Affine) else (None if item is None else np.asarray(item).shape)
        if size is not None and size not in (dim, (dim, dim)):
            raise ValueError("fidelity operands have mismatched dimensions")
    wrap = lambda item: item if isinstance(item, Affine) else _const(problem, item, dim)
    for item in (r, s):
        if item is not None and not isinstance(item, Affine) and _vanishes(np.asarray(item, dtype=complex)):
            full = [problem.add_block(dim, "herm") if x is None else x for x in (r, s)]
            return FidelityBundle(None, wrap(full[0]), wrap(full[1]), Scalar(problem, {}, 0.0))
    for fixed_first in (True, False):
        fixed, other = (r, s) if fixed_first else (s, r)
        if fixed is None or isinstance(fixed, Affine):
            continue
        v = _support(np.asarray(fixed, dtype=complex))
        if v is None:
            continue
        fixed_c, fixed_full = _compress(problem, fixed, v, dim)
        other_c, other_full = _compress(problem, other, v, dim)
        pair = (fixed_c, other_c) if fixed_first else (other_c, fixed_c)
        inner = fidelity_epigraph(problem, *pair, dim=v.shape[1])
        full_r, full_s = (fixed_full, other_full) if fixed_first else (other_full, fixed_full)
        return FidelityBundle(inner.block, wrap(full_r), wrap(full_s), inner.re_tr_x)
    return _fidelity_block(problem, r, s, dim)


def _const(problem: SdpProblem, m: np.ndarray, dim: int) -> Affine:
    return Affine(problem, dim, {}, np.asarray(m, dtype=complex))


def _fidelity_block(problem: SdpProblem, r, s, dim: int) -> FidelityBundle:
    w = problem.add_block(2 * dim, "herm")
    w11 = w.block(0, dim)
    w22 = w.block(dim, 2 * dim)
    for corner, item in ((w11, r), (w22, s)):
        if item is None:
            continue
        if isinstance(item, Affine):
            problem.constrain_eq(corner - item, 0.0)
        else:
            problem.constrain_eq(corner, np.asarray(item, dtype=complex))
    sel = np.zeros((2 * dim, 2 * dim))
    sel[dim:, :dim] = np.eye(dim)
    return FidelityBundle(w, w11, w22, w.inner(sel))
