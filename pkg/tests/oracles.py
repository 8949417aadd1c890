"""Independent reference computations used to derive and cross-check frozen test values.

Nothing here imports the package under test.  Formulas are evaluated in
mpmath at 50 digits; game values come from direct recursion over explicit
histories rather than the package's DAG kernels.
"""
from __future__ import annotations

import itertools
import math

import mpmath as mp
import numpy as np
from scipy import optimize, special

mp.mp.dps = 50


def cap(y, s2):
    y, s2 = mp.mpf(y), mp.mpf(s2)
    return min(mp.mpf(1) / 2 + mp.sqrt(1 - y) / (mp.sqrt(2) * s2) + (1 - y) / s2, mp.mpf(1))


def alice_bias(n, s2, f_star, l):
    n, l = mp.mpf(n), mp.mpf(l)
    y = mp.mpf(f_star) - l / mp.sqrt(n)
    return min(mp.mpf(1) / 2, 2 * mp.e ** (-l * l / 2) + cap(y, s2) + l / mp.sqrt(n) - mp.mpf(1) / 2)


def alice_entropy(n, s2, f_star, l):
    n, l = mp.mpf(n), mp.mpf(l)
    y = mp.mpf(f_star) - l / mp.sqrt(n)
    return max(mp.mpf(0), -n * mp.log(cap(y, s2), 2) * (1 - mp.e ** (-l * l / 2)))


def h2(p):
    p = mp.mpf(p)
    return -p * mp.log(p, 2) - (1 - p) * mp.log(1 - p, 2)


def threshold_root(n, s2, l):
    """f* solving eps_A + eps_B = 1/2 (unclamped branch) by mpmath root finding."""
    n, l, s2 = mp.mpf(n), mp.mpf(l), mp.mpf(s2)
    eb = mp.sqrt(s2) / 2

    def g(f):
        y = f - l / mp.sqrt(n)
        raw = mp.mpf(1) / 2 + mp.sqrt(1 - y) / (mp.sqrt(2) * s2) + (1 - y) / s2
        return 2 * mp.e ** (-l * l / 2) + raw + l / mp.sqrt(n) - mp.mpf(1) / 2 + eb - mp.mpf(1) / 2

    return mp.findroot(g, (mp.mpf("0.9"), mp.mpf(1)), solver="bisect", tol=mp.mpf(10) ** -40)


def noiseless_bias_display(n):
    """Explicit noiseless bias expression at f* = 1, l = sqrt(ln n), sin^2 = (ln n/n)^(1/6)."""
    n = mp.mpf(n)
    r = mp.log(n) / n
    return r ** (mp.mpf(1) / 12) / mp.sqrt(2) + r ** (mp.mpf(1) / 3) + mp.sqrt(r) + 2 / mp.sqrt(n)


def noiseless_entropy_display(n):
    """Explicit noiseless entropy expression at f* = 1, l = sqrt(ln n), sin^2 = (ln n/n)^(1/8)."""
    n = mp.mpf(n)
    s2 = (mp.log(n) / n) ** (mp.mpf(1) / 8)
    inner = (mp.mpf(1) / 2 + mp.log(n) ** (mp.mpf(1) / 4) / (mp.sqrt(2) * s2 * n ** (mp.mpf(1) / 4))
             + mp.sqrt(mp.log(n)) / (mp.sqrt(n) * s2))
    return -n * mp.log(inner, 2) * (1 - 1 / mp.sqrt(n))


# -- strike-out game by explicit recursion over histories -----------------

def _entropy(dist):
    return float(-sum(p * math.log2(p) for p in dist.values() if p > 0))


def strikeout_distributions(n_bits, cheater):
    """Every honest-output distribution reachable by a deterministic cheater strategy.

    Strategies are enumerated as full history-dependent plans; the game is
    replayed from scratch for each plan.
    """
    strings = tuple(format(i, f"0{n_bits}b") for i in range(2 ** n_bits))

    def plans(survivors, mover):
        # yields (plan, distribution); a plan is the cheater's move with sub-plans per reply
        if len(survivors) == 1:
            yield None, {survivors[0]: 1.0}
            return
        nxt = "B" if mover == "A" else "A"
        if mover == cheater:
            for s in survivors:
                rest = tuple(x for x in survivors if x != s)
                for sub, d in plans(rest, nxt):
                    yield (s, sub), d
        else:
            options = []
            for s in survivors:
                rest = tuple(x for x in survivors if x != s)
                options.append(list(plans(rest, nxt)))
            for combo in itertools.product(*options):
                d = {}
                for sub_plan, sub_d in combo:
                    for k, v in sub_d.items():
                        d[k] = d.get(k, 0.0) + v / len(survivors)
                yield tuple(c[0] for c in combo), d

    return [d for _, d in plans(strings, "A")]


def strikeout_min_entropy(n_bits, cheater):
    ds = strikeout_distributions(n_bits, cheater)
    return min(_entropy(d) for d in ds), len(ds)


def trivial2_match_value(cheater, target="00"):
    """Trivial n=2 protocol: Alice sends bit 1, Bob sends bit 2, honest bits fair."""
    best = 0.0
    for own in "01":
        vals = []
        for other in "01":
            s = own + other if cheater == "A" else other + own
            vals.append(sum(a == b for a, b in zip(s, target)) / 2)
        best = max(best, sum(vals) / 2)
    return best


# -- Helstrom by numeric maximisation -------------------------------------

def best_qubit_discrimination(theta, restarts=20, seed=0):
    """Maximise 1/2 (Tr E rho0 + Tr (I-E) rho1) over qubit effects 0 <= E <= I."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    r0 = np.outer([c, s], [c, s])
    r1 = np.outer([c, -s], [c, -s])
    rng = np.random.default_rng(seed)

    def effect(x):
        g = (x[0:4] + 1j * x[4:8]).reshape(2, 2)
        v, _ = np.linalg.qr(g)
        w = special.expit(x[8:10])
        return (v * w) @ v.conj().T

    def neg(x):
        e = effect(x)
        return -0.5 * (np.trace(e @ r0).real + np.trace((np.eye(2) - e) @ r1).real)

    best = 0.0
    for _ in range(restarts):
        res = optimize.minimize(neg, rng.normal(size=10) * 2, method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
        best = max(best, -res.fun)
    return best
