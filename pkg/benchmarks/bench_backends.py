"""Compare the compiled search kernel with the pure-Python fallback.

Runs the same entailment queries through both backends and reports wall time
per instance plus the speedup. Verdicts must agree; a mismatch aborts.

    python3 benchmarks/bench_backends.py --layers 4,6,4,1 --seeds 5
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time

from phicoherent.generators import NetSpec, gen_mlp_kb, random_instance
from phicoherent.solver import available_backends, entails


def _time(kb, q, backend, mode, repeat):
    best, verdict = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        verdict = entails(kb, q, mode=mode, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, verdict


def instances(args):
    for layers in args.layers:
        shape = tuple(int(x) for x in layers.split(","))
        for seed in range(args.seeds):
            kb, q = gen_mlp_kb(NetSpec(shape, seed=seed, n=args.n))
            yield f"mlp {layers} s{seed}", kb, q
    for seed in range(args.random):
        kb, q = random_instance(seed)
        yield f"random s{seed}", kb, q


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--layers", nargs="+", default=["3,4,1", "4,6,4,1", "6,8,6,1", "10,20,19,1"])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--random", type=int, default=0, help="also time this many random KBs")
    ap.add_argument("--n", type=int, default=4)
    ap.add_argument("--mode", default="descending")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if "cython" not in available_backends():
        print("compiled kernel not built; reinstall without PHICOHERENT_NO_EXT", file=sys.stderr)
        return 1
    print(f"{'instance':<22} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    ratios = []
    for label, kb, q in instances(args):
        tp, vp = _time(kb, q, "python", args.mode, args.repeat)
        tc, vc = _time(kb, q, "cython", args.mode, args.repeat)
        if (vp.entailed, vp.typical_degree) != (vc.entailed, vc.typical_degree):
            print(f"{label}: backends disagree ({vp} vs {vc})", file=sys.stderr)
            return 2
        ratios.append(tp / tc if tc > 0 else float("inf"))
        print(f"{label:<22} {tp:10.4f} {tc:10.4f} {ratios[-1]:8.1f}x")
    if ratios:
        print(f"geometric mean speedup: {statistics.geometric_mean(ratios):.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
