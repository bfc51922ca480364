"""Entanglement-generation and private classical codes on concrete channels.

Labels used throughout: channel inputs ``A'1..A'n``, outputs ``B1..Bn``,
environments ``E1..En``, reference ``R``, decoded system ``A`` (ent-gen),
message register ``X'`` and decoded message ``X`` (private codes).
"""

from __future__ import annotations

import heapq
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._config import check_dim
from .channels import (
    ChoiMatrix,
    QuantumChannel,
    channel_from_dict,
    channel_to_dict,
    from_choi,
    stinespring,
    tensor_power,
)
from .degradability import project_cptp
from .linalg import (
    DensityState,
    PureState,
    StateError,
    classical_correlated,
    fidelity,
    fidelity_matrices,
    maximally_entangled,
    partial_trace,
    permute,
    state_from_dict,
    state_to_dict,
    trace_distance,
)
from .sdp import SdpError, SdpProblem, fidelity_epigraph, solve

SDP_TOL = 1e-9
# 1 - F^2 below this is reported as an exact zero distance; the square root
# would otherwise turn rounding noise of order 1e-16 into 1e-8
ZERO_GAP = 1e-12

OMEGA_POLICY = "delta minimised over the fixed environment state omega, per code"


class CodeError(ValueError):
    pass


def in_labels(n: int) -> list[str]:
    return [f"A'{i}" for i in range(1, n + 1)]


def out_labels(n: int) -> list[str]:
    return [f"B{i}" for i in range(1, n + 1)]


def env_labels(n: int) -> list[str]:
    return [f"E{i}" for i in range(1, n + 1)]


def _distance_from_fidelity(f: float) -> float:
    gap = 1.0 - min(1.0, f) ** 2
    return 0.0 if gap <= ZERO_GAP else math.sqrt(gap)


# ---------------------------------------------------------------------------
# code types


@dataclass(frozen=True, eq=False)
class EntGenCode:
    """Pure input ``psi`` on ``A'^n (x) R`` and a decoder ``B^n -> A``."""

    n: int
    N: int
    psi: PureState
    decoder: QuantumChannel

    def __post_init__(self):
        if not isinstance(self.psi, PureState):
            raise CodeError("entanglement-generation inputs must be pure states")
        if self.n < 1 or self.N < 1:
            raise CodeError("n and N must be positive")
        if "R" not in self.psi.layout.labels or self.psi.layout.dim_of(["R"]) != self.N:
            raise CodeError(f"input state needs a reference system R of dimension {self.N}")
        if self.decoder.out_dim != self.N:
            raise CodeError(f"decoder outputs dimension {self.decoder.out_dim}, expected {self.N}")

    def input_matrix(self) -> np.ndarray:
        """Amplitudes as a ``dim(A'^n) x N`` matrix."""
        labels = self.psi.layout.labels
        r = labels.index("R")
        dims = self.psi.layout.dims
        t = self.psi.amplitudes.reshape(dims)
        t = np.moveaxis(t, r, -1)
        return t.reshape(-1, self.N)

    def to_dict(self) -> dict:
        return {
            "type": "entgen",
            "n": self.n,
            "N": self.N,
            "psi": {
                "subsystems": [[lab, d] for lab, d in self.psi.layout.subsystems],
                "amplitudes": [[float(z.real), float(z.imag)] for z in self.psi.amplitudes],
            },
            "decoder": channel_to_dict(self.decoder),
        }


@dataclass(frozen=True, eq=False)
class PrivateCode:
    """Encodings ``nu_m`` on ``A'^n`` and a decoder ``B^n -> X`` with ``|X| = M``."""

    n: int
    M: int
    encodings: tuple[DensityState, ...]
    decoder: QuantumChannel

    def __post_init__(self):
        object.__setattr__(self, "encodings", tuple(self.encodings))
        if self.n < 1 or self.M < 1:
            raise CodeError("n and M must be positive")
        if len(self.encodings) != self.M:
            raise CodeError(f"{len(self.encodings)} encodings for M = {self.M}")
        for nu in self.encodings:
            if not nu.is_normalized:
                raise StateError("encodings must be normalised states")
        if len({nu.layout.total for nu in self.encodings}) != 1:
            raise CodeError("encodings live on different spaces")
        if self.decoder.out_dim != self.M:
            raise CodeError(f"decoder outputs dimension {self.decoder.out_dim}, expected {self.M}")

    def to_dict(self) -> dict:
        return {
            "type": "private",
            "n": self.n,
            "M": self.M,
            "encodings": [state_to_dict(nu) for nu in self.encodings],
            "decoder": channel_to_dict(self.decoder),
        }


def code_from_dict(data: dict):
    kind = data.get("type")
    if kind == "entgen":
        p = data["psi"]
        amps = np.asarray(p["amplitudes"], dtype=float)
        psi = PureState(p["subsystems"], amps[:, 0] + 1j * amps[:, 1])
        return EntGenCode(int(data["n"]), int(data["N"]), psi, channel_from_dict(data["decoder"]))
    if kind == "private":
        encs = tuple(state_from_dict(e) for e in data["encodings"])
        return PrivateCode(int(data["n"]), int(data["M"]), encs, channel_from_dict(data["decoder"]))
    raise CodeError(f"unknown code type {kind!r}")


def code_to_json(code) -> str:
    return json.dumps(code.to_dict())


def code_from_json(text: str):
    return code_from_dict(json.loads(text))


@dataclass
class CodePerformance:
    eps: float
    delta: float | None = None
    eps_trace: float | None = None  # trace-distance version of the decoding error
    states: dict = field(default_factory=dict, repr=False)
    omega: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {"eps": self.eps, "delta": self.delta, "eps_trace": self.eps_trace}
        if self.delta is not None:
            out["omega_policy"] = OMEGA_POLICY
        return out


# ---------------------------------------------------------------------------
# evaluation


def _powered(c: QuantumChannel, n: int, extra: int) -> QuantumChannel:
    cn = tensor_power(c, n)
    check_dim(cn.out_dim * cn.env_dim * extra, "dimension of B^n E^n and the code register")
    return cn


def entgen_sigma(c: QuantumChannel, code: EntGenCode) -> PureState:
    """``(U^{(x)n} (x) I_R) psi`` on ``R B1..Bn E1..En``."""
    cn = _powered(c, code.n, code.N)
    psi = code.input_matrix()
    if psi.shape[0] != cn.in_dim:
        raise CodeError(f"input state has channel part of dimension {psi.shape[0]}, channel needs {cn.in_dim}")
    v = stinespring(cn).matrix
    sig = (v @ psi).T.reshape(-1)
    sig = sig / np.linalg.norm(sig)
    layout = [("R", code.N)] + [(b, c.out_dim) for b in out_labels(code.n)] + [(e, c.env_dim) for e in env_labels(code.n)]
    return PureState(layout, sig)


def eval_entgen(c: QuantumChannel, code: EntGenCode) -> CodePerformance:
    n, N = code.n, code.N
    sigma = entgen_sigma(c, code)
    sigma_rb = partial_trace(sigma, ["R"] + out_labels(n))
    sigma_re = partial_trace(sigma, ["R"] + env_labels(n))
    if code.decoder.in_dim != sigma_rb.layout.total // N:
        raise CodeError("decoder input dimension does not match B^n")
    xi = code.decoder.apply_on(sigma_rb.matrix, [N, sigma_rb.layout.total // N], 1)
    xi_ar = permute(DensityState([("R", N), ("A", N)], xi), ["A", "R"])
    phi = maximally_entangled(("A", "R"), N)
    f2 = float(np.real(phi.amplitudes.conj() @ xi_ar.matrix @ phi.amplitudes))
    target = phi.density()
    eps = _distance_from_fidelity(math.sqrt(max(0.0, f2)))
    states = {"sigma": sigma, "sigma_RB": sigma_rb, "sigma_RE": sigma_re, "xi_AR": xi_ar, "target_AR": target}
    return CodePerformance(eps, None, trace_distance(target, xi_ar), states)


def _block_diag_classical(blocks: list[np.ndarray], m: int) -> np.ndarray:
    """``sum_m blocks[m] (x) |m><m| / M``."""
    d = blocks[0].shape[0]
    out = np.zeros((d * m, d * m), dtype=complex)
    t = out.reshape(d, m, d, m)
    for k, b in enumerate(blocks):
        t[:, k, :, k] = b / m
    return out


def min_privacy_distance(env_states: list[np.ndarray], tol: float = SDP_TOL) -> tuple[float, np.ndarray]:
    """``min_omega P(sum_m |m><m| (x) xi_m / M, omega (x) I/M)`` and the minimiser.

    The fidelity splits over message blocks as ``sum_m F(xi_m, omega) / M``,
    maximised over normalised ``omega`` by one SDP with a shared ``omega``.
    The returned distance is recomputed exactly at the (projected) optimiser,
    so it is attained, not merely estimated.
    """
    m = len(env_states)
    de = env_states[0].shape[0]
    if de == 1:
        return 0.0, np.ones((1, 1), dtype=complex)
    prob = SdpProblem()
    omega = prob.add_block(de, "herm", "omega")
    prob.constrain_eq(omega.trace(), 1.0)
    total = None
    for xi in env_states:
        term = fidelity_epigraph(prob, xi, omega).re_tr_x * (1.0 / m)
        total = term if total is None else total + term
    prob.maximize(total)
    sol = solve(prob, tol=tol)
    if not sol.blocks:
        raise SdpError(f"privacy SDP failed with status {sol.status}", sol)
    if not sol.ok and sol.primal_residual > 1e-6:
        raise SdpError(f"privacy SDP failed with status {sol.status}", sol)
    w = sol.blocks[0]
    w = (w + w.conj().T) / 2
    ev, vec = np.linalg.eigh(w)
    w = (vec * np.clip(ev, 0.0, None)) @ vec.conj().T
    w = w / np.trace(w).real
    f = sum(fidelity_matrices(xi, w) for xi in env_states) / m
    return _distance_from_fidelity(f), w


def private_sigma(c: QuantumChannel, code: PrivateCode) -> DensityState:
    """``sum_m sigma_m^{B^n E^n} (x) |m><m|_{X'} / M``."""
    n, m = code.n, code.M
    cn = _powered(c, n, m)
    if code.encodings[0].layout.total != cn.in_dim:
        raise CodeError(f"encodings have dimension {code.encodings[0].layout.total}, channel needs {cn.in_dim}")
    v = stinespring(cn).matrix
    blocks = [v @ nu.matrix @ v.conj().T for nu in code.encodings]
    layout = [(b, c.out_dim) for b in out_labels(n)] + [(e, c.env_dim) for e in env_labels(n)] + [("X'", m)]
    return DensityState(layout, _block_diag_classical(blocks, m))


def eval_private(c: QuantumChannel, code: PrivateCode, tol: float = SDP_TOL) -> CodePerformance:
    n, m = code.n, code.M
    sigma = private_sigma(c, code)
    bl, el = out_labels(n), env_labels(n)
    sigma_bx = partial_trace(sigma, bl + ["X'"])
    sigma_ex = partial_trace(sigma, el + ["X'"])
    db = sigma_bx.layout.total // m
    de = sigma_ex.layout.total // m
    if code.decoder.in_dim != db:
        raise CodeError("decoder input dimension does not match B^n")
    xi = DensityState([("X", m), ("X'", m)], code.decoder.apply_on(sigma_bx.matrix, [db, m], 0))
    target = classical_correlated(("X", "X'"), m)
    eps = _distance_from_fidelity(fidelity(target, xi))
    t = sigma_ex.matrix.reshape(de, m, de, m)
    env_states = [t[:, k, :, k] * m for k in range(m)]
    delta, omega = min_privacy_distance(env_states, tol)
    states = {
        "sigma": sigma,
        "sigma_BX'": sigma_bx,
        "sigma_EX'": sigma_ex,
        "xi_XX'": xi,
        "target_XX'": target,
        "omega_target": DensityState(sigma_ex.layout, np.kron(omega, np.eye(m) / m)),
    }
    return CodePerformance(eps, delta, trace_distance(target, xi), states, omega)


# ---------------------------------------------------------------------------
# optimal decoder


def optimal_entgen_decoder(c: QuantumChannel, n: int, psi: PureState, N: int, tol: float = SDP_TOL) -> tuple[ChoiMatrix, float]:
    """Best CPTP decoder for a fixed input; the entanglement fidelity is linear in its Choi matrix.

    ``F^2 = <Phi| (D (x) id)(sigma_RB) |Phi> = Tr[J(D) sigma_RB^T] / N`` with
    ``R`` identified with the decoder output. The solver's Choi matrix is
    projected onto exact CPTP maps and the error re-evaluated from the result.
    """
    from .channels import identity as _id

    probe = EntGenCode(n, N, psi, _id(N))
    sigma = entgen_sigma(c, probe)
    sigma_rb = partial_trace(sigma, ["R"] + out_labels(n)).matrix
    db = sigma_rb.shape[0] // N
    check_dim(N * db, "decoder Choi dimension")
    prob = SdpProblem()
    j = prob.add_block(N * db, "herm", "decoder_choi")
    marginal = j.linmap(lambda x: np.einsum("kaiaj->kij", x.reshape(-1, N, db, N, db)), db)
    prob.constrain_eq(marginal, np.eye(db))
    prob.maximize(j.inner(sigma_rb.T / N))
    sol = solve(prob, tol=tol)
    if not sol.blocks or (not sol.ok and sol.primal_residual > 1e-6):
        raise SdpError(f"decoder SDP failed with status {sol.status}", sol)
    jm = project_cptp(sol.blocks[0], db, N)
    choi = ChoiMatrix(db, N, jm)
    perf = eval_entgen(c, EntGenCode(n, N, psi, from_choi(choi, tol=1e-7)))
    return choi, perf.eps


# ---------------------------------------------------------------------------
# random search


@dataclass(frozen=True)
class SearchShape:
    """``kind`` is ``"entgen"`` (``size`` = N) or ``"private"`` (``size`` = M).

    ``fixed_input`` pins the ent-gen input state so that only the decoder is
    searched. ``region_first`` ranks private codes inside the converse region
    ahead of those outside it.
    """

    kind: str
    size: int
    fixed_input: PureState | None = None
    region_first: bool = False

    def __post_init__(self):
        if self.kind not in ("entgen", "private"):
            raise CodeError(f"unknown code kind {self.kind!r}")
        if self.size < 1:
            raise CodeError("code size must be positive")


@dataclass
class SearchResult:
    best: object
    performance: CodePerformance
    history: list[tuple[int, float, float | None]]  # (trial, eps, delta) in trial order
    top: list[tuple[object, CodePerformance]]
    seed: int
    trials: int
    chains: int
    shape: SearchShape

    def to_dict(self) -> dict:
        return {
            "kind": self.shape.kind,
            "size": self.shape.size,
            "seed": self.seed,
            "trials": self.trials,
            "chains": self.chains,
            "best": self.best.to_dict(),
            "performance": self.performance.to_dict(),
            "history": [list(h) for h in self.history],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _polar_isometry(g: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(g, full_matrices=False)
    return u @ vh


def _cplx(x: np.ndarray) -> np.ndarray:
    h = x.size // 2
    return x[:h] + 1j * x[h:]


class _Problem:
    """Parameter vector <-> code, plus a fast objective for the search loop."""

    def __init__(self, c: QuantumChannel, n: int, shape: SearchShape):
        self.c, self.n, self.shape = c, n, shape
        self.cn = tensor_power(c, n)
        self.din, self.db = self.cn.in_dim, self.cn.out_dim
        size = shape.size
        check_dim(self.db * self.cn.env_dim * size, "dimension of B^n E^n and the code register")
        if shape.kind == "entgen":
            self.kraus_rank = size * self.db
            self.n_psi = 0 if shape.fixed_input is not None else self.din * size
            self.n_dec = size * self.kraus_rank * self.db
            if shape.fixed_input is not None:
                self._c_mat = self._rb_matrix(shape.fixed_input) / size
        else:
            self.n_psi = size * self.din
            self.n_dec = size * self.db * self.db
        self.dim = 2 * (self.n_psi + self.n_dec)

    def _rb_matrix(self, psi: PureState) -> np.ndarray:
        probe = EntGenCode(self.n, self.shape.size, psi, QuantumChannel([np.eye(self.shape.size)]))
        sig = entgen_sigma(self.c, probe)
        return partial_trace(sig, ["R"] + out_labels(self.n)).matrix

    def _split(self, x: np.ndarray):
        z = _cplx(x)
        return z[: self.n_psi], z[self.n_psi :]

    def _decoder_isometry(self, zd: np.ndarray) -> np.ndarray:
        size = self.shape.size
        if self.shape.kind == "entgen":
            return _polar_isometry(zd.reshape(size * self.kraus_rank, self.db))
        return _polar_isometry(zd.reshape(size * self.db, self.db))

    def _entgen_psi(self, zp: np.ndarray) -> PureState:
        if self.shape.fixed_input is not None:
            return self.shape.fixed_input
        v = zp / np.linalg.norm(zp)
        layout = [(a, self.c.in_dim) for a in in_labels(self.n)] + [("R", self.shape.size)]
        return PureState(layout, v)

    def build(self, x: np.ndarray):
        zp, zd = self._split(x)
        size = self.shape.size
        v = self._decoder_isometry(zd)
        if self.shape.kind == "entgen":
            k = v.reshape(size, self.kraus_rank, self.db)
            dec = QuantumChannel([k[:, i, :] for i in range(self.kraus_rank)], tol=1e-8)
            return EntGenCode(self.n, size, self._entgen_psi(zp), dec)
        # measure-and-prepare decoder from the POVM rows of the isometry
        rows = v.reshape(size, self.db, self.db)
        ops = []
        for xo in range(size):
            for r in range(self.db):
                k = np.zeros((size, self.db), dtype=complex)
                k[xo] = rows[xo, r]
                ops.append(k)
        dec = QuantumChannel(ops, tol=1e-8)
        layout = [(a, self.c.in_dim) for a in in_labels(self.n)]
        encs = []
        for m in range(size):
            a = zp[m * self.din : (m + 1) * self.din]
            a = a / np.linalg.norm(a)
            encs.append(DensityState(layout, np.outer(a, a.conj())))
        return PrivateCode(self.n, size, tuple(encs), dec)

    def score(self, x: np.ndarray) -> tuple[float, float | None]:
        """``(eps, delta)`` of the code at ``x`` (fast path, same values as full evaluation)."""
        zp, zd = self._split(x)
        size = self.shape.size
        v = self._decoder_isometry(zd)
        if self.shape.kind == "entgen":
            if self.shape.fixed_input is not None:
                cm = self._c_mat
            else:
                cm = self._rb_matrix(self._entgen_psi(zp)) / size
            # F^2 = sum_k vec(K_k)^dag C^T vec(K_k) with Kraus K_k = v[:, k, :]
            kv = v.reshape(size, self.kraus_rank, self.db).transpose(1, 0, 2).reshape(self.kraus_rank, -1)
            f2 = float(np.real(np.einsum("kp,pq,kq->", kv.conj(), cm.T, kv)))
            return _distance_from_fidelity(math.sqrt(max(0.0, f2))), None
        code = self.build(x)
        perf = eval_private(self.c, code)
        return perf.eps, perf.delta


def _region_ok(eps: float, delta: float) -> bool:
    return delta * math.sqrt(max(0.0, 1 - eps * eps)) + eps * math.sqrt(max(0.0, 1 - delta * delta)) < 1.0


def _key(shape: SearchShape, eps: float, delta: float | None) -> tuple:
    d = 0.0 if delta is None else delta
    if shape.kind == "private" and shape.region_first:
        return (0 if _region_ok(eps, d) else 1, eps, d)
    return (eps, d)


SUCCESS_UP = 1.22
FAIL_DOWN = SUCCESS_UP ** -0.25  # keeps the step size stationary at a 1/5 success rate
STEP0 = 0.5
STEP_MIN = 1e-8


def _run_chain(args):
    """One (1+1) evolution strategy; trial ``k`` of chain ``w`` is global trial ``k * chains + w``."""
    c, n, shape, seed_seq, count, chain, chains, top = args
    prob = _Problem(c, n, shape)
    rng = np.random.default_rng(seed_seq)
    x = rng.standard_normal(prob.dim)
    step = STEP0
    cur_key = None
    history = []
    best: list = []  # max-heap on key via negation of order index
    for k in range(count):
        cand = x if k == 0 else x + step * rng.standard_normal(prob.dim)
        eps, delta = prob.score(cand)
        key = _key(shape, eps, delta)
        t = k * chains + chain
        history.append((t, eps, delta))
        item = (tuple(-v for v in key), -t, cand)
        if len(best) < top:
            heapq.heappush(best, item)
        elif item[:2] > best[0][:2]:
            heapq.heapreplace(best, item)
        if k == 0:
            cur_key = key
            continue
        if key <= cur_key:
            x, cur_key = cand, key
            step *= SUCCESS_UP
        else:
            step = max(STEP_MIN, step * FAIL_DOWN)
    return history, [(tuple(-v for v in it[0]), -it[1], it[2]) for it in best]


def initial_candidate(c: QuantumChannel, n: int, shape: SearchShape, seed: int, chain: int = 0, chains: int = 1):
    """The first code tried by chain ``chain`` of :func:`random_code_search`."""
    seq = np.random.SeedSequence(seed).spawn(chains)[chain]
    prob = _Problem(c, n, shape)
    return prob.build(np.random.default_rng(seq).standard_normal(prob.dim))


def random_code_search(
    c: QuantumChannel,
    n: int,
    shape: SearchShape,
    trials: int,
    seed: int,
    chains: int = 1,
    workers: int = 1,
    top: int = 5,
) -> SearchResult:
    """Seeded local search over codes of the given shape.

    Trials are spread round-robin over ``chains`` independent (1+1) evolution
    strategies, each with its own ``SeedSequence`` substream. Each chain's
    first trial is a random code; later trials perturb the chain's incumbent
    and keep the perturbation if it is no worse. The result depends on
    ``(seed, chains, trials)`` only, not on ``workers``, and the candidates of
    a shorter run are a prefix of those of a longer one. Codes are ranked by
    ``(eps, delta)`` lexicographically.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if chains < 1 or workers < 1:
        raise ValueError("chains and workers must be positive")
    chains = min(chains, trials)
    seqs = np.random.SeedSequence(seed).spawn(chains)
    jobs = [(c, n, shape, seqs[w], len(range(w, trials, chains)), w, chains, top) for w in range(chains)]
    if workers > 1 and chains > 1:
        with ProcessPoolExecutor(max_workers=min(workers, chains)) as pool:
            outs = list(pool.map(_run_chain, jobs))
    else:
        outs = [_run_chain(j) for j in jobs]
    history = sorted((h for out in outs for h in out[0]), key=lambda h: h[0])
    ranked = sorted((it for out in outs for it in out[1]), key=lambda it: (it[0], it[1]))[:top]
    prob = _Problem(c, n, shape)
    evaluate = eval_entgen if shape.kind == "entgen" else eval_private
    top_codes = []
    for _, _, x in ranked:
        code = prob.build(x)
        top_codes.append((code, evaluate(c, code)))
    best_code, best_perf = top_codes[0]
    return SearchResult(best_code, best_perf, history, top_codes, seed, trials, chains, shape)
