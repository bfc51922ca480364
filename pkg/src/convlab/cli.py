"""Command-line front end.

Exit codes: 0 success, 1 usage or parse error, 2 domain error, 3 failed
verification. Every JSON record carries a ``meta`` object with the tool
version, seed, tolerances and FNV-1a-64 hashes of the inputs.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import click
import numpy as np

from . import __version__
from .channels import ChannelError, channel_from_dict, from_choi
from .codes import CodeError, EntGenCode, SearchShape, optimal_entgen_decoder, random_code_search
from .converse import (
    CHAIN_TOL,
    DUALITY_TOL,
    ChainReport,
    ChainStep,
    ConverseDomainError,
    ConverseParams,
    PreconditionError,
    private_bound,
    quantum_bound,
    region_check,
    region_curve,
    verify_lemma1,
    verify_private_chain,
    verify_quantum_chain,
)
from .degradability import DEFAULT_THRESHOLD, certify_antidegradable, certify_degradable
from .entropies import (
    conditional_entropy,
    h_max,
    h_max_smooth,
    h_max_smooth_direct,
    h_min,
    h_min_smooth,
    von_neumann,
)
from .linalg import LayoutError, StateError, maximally_entangled, random_density, state_from_dict
from .sdp import SdpError

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_VERIFY = 0, 1, 2, 3
LN2 = math.log(2.0)
SUITES = ("lemma1", "duality", "private-chain", "quantum-chain")

DEFAULT_SUITE_CONFIG = {
    "states": 5,             # seeded 2x2 states per lemma1 / duality item group
    "duality_eps": [0.0, 0.1, 0.3],
    "lemma1_angles": [[0.0, 0.0], [math.pi / 8, math.pi / 8], [math.pi / 6, math.pi / 12]],
    "channel": {"kind": "erasure", "p": 0.5},
    "private_trials": 50,
    "private_codes": 2,
}


def fnv1a64(data: bytes) -> str:
    """64-bit FNV-1a as 16 hex digits."""
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


class Ctx:
    def __init__(self, seed: int, nats: bool):
        self.seed = seed
        self.nats = nats
        self.hashes: dict[str, str] = {}
        self.tolerances: dict[str, float] = {}

    def meta(self) -> dict:
        return {
            "tool": "convlab",
            "version": __version__,
            "seed": self.seed,
            "tolerances": dict(sorted(self.tolerances.items())),
            "input_hashes": dict(sorted(self.hashes.items())),
            "units": "nats" if self.nats else "bits",
        }

    def unit(self, bits: float) -> float:
        return bits * LN2 if self.nats else bits

    def emit(self, record: dict) -> None:
        record = dict(record)
        record["meta"] = self.meta()
        click.echo(json.dumps(record, sort_keys=True, ensure_ascii=False))

    def load_json(self, path: str, what: str) -> dict:
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            self.fail(EXIT_USAGE, f"cannot read {what} file: {exc}")
        self.hashes[path] = fnv1a64(raw)
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            self.fail(EXIT_USAGE, f"{what} file is not valid JSON: {exc}")

    def fail(self, code: int, reason: str, **extra) -> None:
        kind = {EXIT_USAGE: "usage", EXIT_DOMAIN: "domain", EXIT_VERIFY: "verification"}[code]
        self.emit({"error": kind, "reason": reason, **extra})
        sys.exit(code)


def _labels(text: str) -> list[str]:
    return [t for t in (x.strip() for x in text.split(",")) if t]


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Seed recorded in every output and used by randomised commands.")
@click.option("--nats", is_flag=True, help="Display entropies and bounds in nats instead of bits.")
@click.version_option(__version__, prog_name="convlab")
@click.pass_context
def cli(ctx, seed: int, nats: bool):
    """Converse bounds, degradability certificates and proof-chain checks."""
    if not 0 <= seed < 2**64:
        raise click.BadParameter("seed must be a 64-bit unsigned integer", param_hint="--seed")
    ctx.obj = Ctx(seed, nats)


# ---------------------------------------------------------------------------
# bound / region


@cli.command()
@click.argument("kind", type=click.Choice(["private", "quantum"]))
@click.option("--eps", type=float, required=True)
@click.option("--delta", type=float, default=None)
@click.pass_obj
def bound(obj: Ctx, kind: str, eps: float, delta: float | None):
    """Converse bound on log M (private) or log N (quantum)."""
    if kind == "private" and delta is None:
        obj.fail(EXIT_USAGE, "private bound needs --delta")
    if kind == "quantum" and delta is not None:
        obj.fail(EXIT_USAGE, "quantum bound takes no --delta")
    try:
        p = ConverseParams(eps, delta)
    except ValueError as exc:
        obj.fail(EXIT_USAGE, str(exc))
    rec = {"command": "bound", "kind": kind, "eps": p.eps, "alpha": p.alpha}
    if kind == "private":
        rec.update(delta=p.delta, beta=p.beta, in_region=region_check(p.eps, p.delta))
    else:
        rec["in_region"] = p.eps < 1 / math.sqrt(2)
    try:
        value = private_bound(p.eps, p.delta) if kind == "private" else quantum_bound(p.eps)
    except ConverseDomainError as exc:
        obj.fail(EXIT_DOMAIN, str(exc), **rec)
    rec["bound"] = obj.unit(value)
    obj.emit(rec)


@cli.command()
@click.option("--step", type=float, required=True, help="Grid step in eps, 0 < step < 1.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV destination (default stdout).")
@click.pass_obj
def region(obj: Ctx, step: float, out: str | None):
    """Boundary samples of the (eps, delta) region as CSV."""
    try:
        rows = region_curve(step)
    except ValueError as exc:
        obj.fail(EXIT_USAGE, str(exc))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps", "delta_max"])
    for e, d in rows:
        w.writerow([f"{e:.9g}", f"{d:.9g}"])
    text = buf.getvalue()
    summary = {"command": "region", "step": step, "rows": len(rows)}
    if out is None:
        click.echo(text, nl=False)
        click.echo(json.dumps({**summary, "meta": obj.meta()}, sort_keys=True, ensure_ascii=False), err=True)
        return
    try:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        obj.fail(EXIT_USAGE, f"cannot write {out}: {exc}")
    obj.emit({**summary, "out": out})


# ---------------------------------------------------------------------------
# certify / entropy


def _channel_spec(obj: Ctx, kind, p, g, d, channel_file):
    if channel_file:
        data = obj.load_json(channel_file, "channel")
    elif kind:
        data = {"kind": kind}
        if p is not None:
            data["p"] = p
        if g is not None:
            data["g"] = g
        if d is not None:
            data["d"] = d
        obj.hashes["channel"] = fnv1a64(json.dumps(data, sort_keys=True).encode())
    else:
        obj.fail(EXIT_USAGE, "give --kind or --channel")
    try:
        return channel_from_dict(data), data
    except (ChannelError, KeyError, TypeError, ValueError) as exc:
        obj.fail(EXIT_USAGE, f"invalid channel: {exc}")


@cli.command()
@click.option("--kind", type=click.Choice(["erasure", "depolarizing", "amplitude_damping", "identity"]), default=None)
@click.option("--p", type=float, default=None)
@click.option("--g", type=float, default=None)
@click.option("--d", type=int, default=None)
@click.option("--channel", "channel_file", type=str, default=None, help="Channel JSON file.")
@click.option("--direction", type=click.Choice(["antidegradable", "degradable"]), default="antidegradable", show_default=True)
@click.option("--threshold", type=float, default=DEFAULT_THRESHOLD, show_default=True)
@click.pass_obj
def certify(obj: Ctx, kind, p, g, d, channel_file, direction, threshold):
    """Certify anti-degradability (or degradability) of a channel."""
    if threshold <= 0:
        obj.fail(EXIT_USAGE, "threshold must be positive")
    c, _ = _channel_spec(obj, kind, p, g, d, channel_file)
    obj.tolerances["threshold"] = threshold
    fn = certify_antidegradable if direction == "antidegradable" else certify_degradable
    try:
        cert = fn(c, threshold=threshold)
    except SdpError as exc:
        obj.fail(EXIT_VERIFY, f"solver failure: {exc}")
    obj.emit({"command": "certify", **cert.to_dict()})


ENTROPY_KINDS = ("vn", "conditional", "hmin", "hmax")


@cli.command()
@click.argument("kind", type=click.Choice(ENTROPY_KINDS))
@click.option("--state", "state_file", required=True, help="State JSON file.")
@click.option("--target", required=True, help="Target labels, comma separated.")
@click.option("--cond", default="", help="Conditioning labels, comma separated.")
@click.option("--eps", type=float, default=0.0, show_default=True, help="Smoothing radius for hmin/hmax.")
@click.pass_obj
def entropy(obj: Ctx, kind, state_file, target, cond, eps):
    """Entropy of a state: vn, conditional, hmin or hmax (smooth when --eps > 0)."""
    data = obj.load_json(state_file, "state")
    try:
        s = state_from_dict(data)
    except (StateError, LayoutError, KeyError, TypeError, ValueError) as exc:
        obj.fail(EXIT_USAGE, f"invalid state: {exc}")
    if not 0.0 <= eps < 1.0:
        obj.fail(EXIT_USAGE, "--eps must lie in [0, 1)")
    tgt, cnd = _labels(target), _labels(cond)
    try:
        if kind == "vn":
            from .linalg import partial_trace

            value = von_neumann(partial_trace(s, tgt))
        elif kind == "conditional":
            value = conditional_entropy(s, tgt, cnd)
        elif kind == "hmin":
            value = h_min_smooth(s, tgt, cnd, eps) if eps > 0 else h_min(s, tgt, cnd)
        else:
            value = h_max_smooth(s, tgt, cnd, eps) if eps > 0 else h_max(s, tgt, cnd)
    except (StateError, LayoutError) as exc:
        obj.fail(EXIT_USAGE, str(exc))
    except SdpError as exc:
        obj.fail(EXIT_VERIFY, f"solver failure: {exc}")
    obj.emit({"command": "entropy", "kind": kind, "target": tgt, "cond": cnd, "eps": eps, "value": obj.unit(value)})


# ---------------------------------------------------------------------------
# verification suites


def _suite_items(suite: str, cfg: dict, seed: int) -> list[tuple]:
    """Deterministic work list; every item carries its own seed material."""
    items = []
    if suite == "lemma1":
        for k in range(int(cfg["states"])):
            for a, b in cfg["lemma1_angles"]:
                items.append(("lemma1", seed, k, float(a), float(b)))
    elif suite == "duality":
        for k in range(int(cfg["states"])):
            for e in cfg["duality_eps"]:
                items.append(("duality", seed, k, float(e)))
    elif suite == "private-chain":
        items.append(("private-chain", seed, json.dumps(cfg["channel"], sort_keys=True), int(cfg["private_trials"]), int(cfg["private_codes"])))
    elif suite == "quantum-chain":
        items.append(("quantum-chain", seed, json.dumps(cfg["channel"], sort_keys=True)))
    return items


def _suite_state(seed: int, k: int):
    seq = np.random.SeedSequence([seed, k])
    return random_density([("A", 2), ("B", 2)], np.random.default_rng(seq))


def _run_item(item: tuple) -> list[dict]:
    kind = item[0]
    if kind == "lemma1":
        _, seed, k, a, b = item
        rep = verify_lemma1(_suite_state(seed, k), "A", "B", a, b)
        return [{"suite": "lemma1", "state": k, **rep.to_dict()}]
    if kind == "duality":
        _, seed, k, e = item
        s = _suite_state(seed, k)
        via_purifier = h_max_smooth(s, "A", "B", e)
        direct = h_max_smooth_direct(s, "A", "B", e).value
        rep = ChainReport(
            "duality",
            [ChainStep("duality_le", via_purifier, direct, DUALITY_TOL), ChainStep("duality_ge", direct, via_purifier, DUALITY_TOL)],
            DUALITY_TOL,
            {"eps": e},
        )
        return [{"suite": "duality", "state": k, **rep.to_dict()}]
    if kind == "private-chain":
        _, seed, spec, trials, ncodes = item
        c = channel_from_dict(json.loads(spec))
        cert = certify_antidegradable(c)
        res = random_code_search(c, 1, SearchShape("private", 2, region_first=True), trials, seed, top=ncodes)
        out = []
        for i, (code, _) in enumerate(res.top):
            rep = verify_private_chain(c, code, cert)
            out.append({"suite": "private-chain", "code": i, **rep.to_dict()})
        return out
    if kind == "quantum-chain":
        _, seed, spec = item
        c = channel_from_dict(json.loads(spec))
        cert = certify_antidegradable(c)
        phi = maximally_entangled(("A'1", "R"), 2)
        choi, _ = optimal_entgen_decoder(c, 1, phi, 2)
        rep = verify_quantum_chain(c, EntGenCode(1, 2, phi, from_choi(choi, tol=1e-7)), cert)
        return [{"suite": "quantum-chain", **rep.to_dict()}]
    raise ValueError(kind)


def _safe_item(item: tuple) -> list[dict]:
    try:
        return _run_item(item)
    except (ConverseDomainError, PreconditionError, SdpError, CodeError) as exc:
        return [{"suite": item[0], "pass": False, "error": type(exc).__name__, "reason": str(exc)}]


@cli.command()
@click.argument("suite", type=click.Choice(SUITES + ("all",)))
@click.option("--config", "config_file", default=None, help="JSON file overriding suite sizes and the channel.")
@click.option("--workers", type=int, default=1, show_default=True, help="Worker processes; output order does not depend on it.")
@click.pass_obj
def verify(obj: Ctx, suite: str, config_file: str | None, workers: int):
    """Run a verification suite, one JSON report per line."""
    if workers < 1:
        obj.fail(EXIT_USAGE, "--workers must be positive")
    cfg = dict(DEFAULT_SUITE_CONFIG)
    if config_file:
        extra = obj.load_json(config_file, "config")
        unknown = set(extra) - set(cfg)
        if unknown:
            obj.fail(EXIT_USAGE, f"unknown config keys: {sorted(unknown)}")
        cfg.update(extra)
    obj.tolerances.update(chain=CHAIN_TOL, duality=DUALITY_TOL)
    suites = SUITES if suite == "all" else (suite,)
    items = [it for s in suites for it in _suite_items(s, cfg, obj.seed)]
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_safe_item, items)
            ok = _stream(obj, results)
    else:
        ok = _stream(obj, map(_safe_item, items))
    obj.emit({"summary": True, "suite": suite, "items": len(items), "pass": ok})
    if not ok:
        sys.exit(EXIT_VERIFY)


def _stream(obj: Ctx, results) -> bool:
    ok = True
    for recs in results:  # map preserves submission order
        for rec in recs:
            ok = ok and bool(rec.get("pass"))
            obj.emit(rec)
    return ok


def main(argv=None) -> None:
    try:
        rv = cli.main(args=argv, prog_name="convlab", standalone_mode=False)
    except click.exceptions.NoArgsIsHelpError as exc:
        click.echo(exc.ctx.get_help())
        sys.exit(EXIT_OK)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_USAGE)
    except click.exceptions.Abort:
        sys.exit(EXIT_USAGE)
    sys.exit(rv if isinstance(rv, int) else EXIT_OK)


if __name__ == "__main__":  # pragma: no cover
    main()
