"""Wall-clock comparison of the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 3]
"""
from __future__ import annotations

import argparse
import math
import time

import numpy as np

from qbsg import _pykernels, classical, harness, qcore, strategies
from qbsg.protocol import PROTOCOL2, ProtocolParams

try:
    from qbsg import _ckernels
except ImportError:
    _ckernels = None


def _sampling_case():
    theta = math.pi / 4
    n = 200
    p = ProtocolParams(n, theta, 0.9, PROTOCOL2, qcore.depolarizing_from_fidelity(0.97))
    b = harness.TrialBatch(p, strategies.make_alice("threshold", theta, n, 0.9), strategies.honest_bob(theta), 1, 0)
    t = harness.round_tables(b)
    u = np.random.default_rng(0).random((harness.BLOCK * 4, n))
    return lambda mod: mod.sample_rounds(u, t.cum, t.choice, t.targets, t.ef, t.fb)


def _backward_case():
    g = classical.build_strikeout(4).graph
    mask = g.cheater_mask(classical.ALICE)
    lv = (g.leaf_out == 0).astype(np.float64)
    return lambda mod: mod.dag_backward(g.child_ptr, g.child_idx, g.child_prob, mask, lv, 1)


def _search_case():
    tree = classical.build_strikeout(3)
    g = tree.graph
    mask = g.cheater_mask(classical.BOB)
    pick = tree.default_strategy(classical.BOB).astype(np.int32)
    leaf_out = np.where(g.leaf_out >= 0, g.leaf_out, 0).astype(np.int32)
    d = _pykernels.dag_distributions(g.child_ptr, g.child_idx, g.child_prob, mask, pick, leaf_out, 8)
    reach = _pykernels.dag_reach(g.child_ptr, g.child_idx, g.child_prob, mask, pick, g.root)
    p = np.ascontiguousarray(d[g.root])
    return lambda mod: mod.local_search_best(g.child_ptr, g.child_idx, mask, pick, reach, d, p)


CASES = {
    "sample_rounds 8192x200": _sampling_case,
    "dag_backward strike-out n=4": _backward_case,
    "local_search_best strike-out n=3": _search_case,
}


def best_time(fn, repeat: int) -> float:
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the Python backend is available")
    print(f"{'kernel':36s} {'python [s]':>12s} {'cython [s]':>12s} {'speedup':>9s}")
    for name, make in CASES.items():
        fn = make()
        tp = best_time(lambda: fn(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:36s} {tp:12.4f} {'-':>12s} {'-':>9s}")
            continue
        tc = best_time(lambda: fn(_ckernels), args.repeat)
        print(f"{name:36s} {tp:12.4f} {tc:12.4f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
