"""Time the compiled ADMM kernel against the pure-Python one.

Each problem is solved with ``method="admm"`` so that only the kernel under
test runs. Both kernels perform the same iterations, so the iteration counts
must match and the objectives agree to rounding.

    python benchmarks/bench_admm.py [--repeat 3]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from convlab.linalg import maximally_entangled
from convlab.sdp import SdpProblem, available_backends, fidelity_epigraph, solve


def _herm(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


def _state(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    r = g @ g.conj().T
    return r / np.trace(r).real


def problems():
    rng = np.random.default_rng(0)
    for d in (4, 16, 32):
        c = _herm(d, rng)

        def build(c=c, d=d):
            p = SdpProblem()
            z = p.add_block(d)
            p.constrain_eq(z.trace(), 1.0)
            p.minimize(z.inner(c))
            return p

        yield f"lambda_min d={d}", build
    for d in (2, 3, 4):
        phi = maximally_entangled(("A", "B"), d).density().matrix

        def build(phi=phi, d=d):
            p = SdpProblem()
            s = p.add_block(d)
            p.constrain_psd(s.kron_left(d) - phi)
            p.minimize(s.trace())
            return p

        yield f"h_min Phi d={d}", build
    for d in (4, 8):
        r, s = _state(d, rng), _state(d, rng)

        def build(r=r, s=s):
            p = SdpProblem()
            p.maximize(fidelity_epigraph(p, r, s).re_tr_x)
            return p

        yield f"fidelity d={d}", build


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = available_backends()
    if "native" not in backends:
        print("compiled kernel not built; only the Python kernel is available")
    print(f"{'problem':<20}{'iters':>7}" + "".join(f"{b + ' ms':>13}" for b in backends) + ("   speedup" if len(backends) == 2 else ""))
    for name, build in problems():
        times, iters, objs = {}, {}, {}
        for b in backends:
            runs = []
            for _ in range(args.repeat):
                prob = build()
                t = time.perf_counter()
                sol = solve(prob, method="admm", backend=b)
                runs.append(time.perf_counter() - t)
            times[b] = statistics.median(runs)
            iters[b] = sol.iterations
            objs[b] = sol.objective
        line = f"{name:<20}{iters[backends[0]]:>7}" + "".join(f"{times[b] * 1e3:>13.2f}" for b in backends)
        if len(backends) == 2:
            line += f"{times['python'] / times['native']:>9.1f}x"
            if iters["native"] != iters["python"] or abs(objs["native"] - objs["python"]) > 1e-9:
                line += "  MISMATCH"
        print(line)


if __name__ == "__main__":
    main()
