"""Acceptance criteria 1-9; each test records one PASS/FAIL line in the terminal summary."""
import json
import math
import time

import numpy as np
import pytest

import oracles
from qbsg import bounds, classical, cli, harness, qcore, strategies
from qbsg.classical import ALICE, BOB
from qbsg.protocol import PROTOCOL1, PROTOCOL2, ProtocolParams

H_ONE_THIRD = 0.9182958340544896
THRESHOLD_1E8 = 0.9920905950170313


def test_criterion_1_correctness(criterion):
    n, trials = 1000, 100_000
    theta = math.pi / 4
    params = ProtocolParams(n, theta, 0.90, PROTOCOL1, qcore.depolarizing_from_fidelity(0.99))
    batch = harness.TrialBatch(params, strategies.honest_alice(theta), strategies.honest_bob(theta), trials, 1)
    t0 = time.perf_counter()
    out = harness.run_trials(batch)
    elapsed = time.perf_counter() - t0
    delta = bounds.correctness_delta(n, 0.99, 0.90)
    rate = float(out.aborted.mean())
    limit = delta + 3 * math.sqrt(delta * (1 - delta) / trials)
    chi = harness.chi_square_uniformity(out.leading_bits(4), 4)
    ok = rate <= limit and chi.passed and elapsed < 300
    criterion(1, "correctness", ok,
              f"abort rate {rate:.5f} <= {limit:.5f}; chi-square p = {chi.p_value:.3g} on "
              f"{out.leading_bits(4).size} strings; {elapsed:.1f} s")
    assert ok


def test_criterion_2_cheating_bob_saturation(criterion):
    n, trials = 100, 1000
    details, ok = [], True
    for theta in (math.pi / 6, math.pi / 4, math.pi / 3):
        bob = strategies.helstrom_bob(theta, "0", n)
        batch = harness.TrialBatch(ProtocolParams(n, theta), strategies.honest_alice(theta), bob, trials, 2)
        st = harness.monte_carlo(batch)
        p = 0.5 + math.sin(theta) / 2
        se = math.sqrt(p * (1 - p) / (n * trials))
        bound = bounds.bob_bias_bound(theta)
        cells = strategies.round_cells_vs_measuring_bob(strategies.honest_single_round(theta), bob.guess)
        exact = cells[3] - 0.5
        good = (abs(st.mean_match - p) <= 3 * se and st.mean_bias <= bound + 3 * se
                and exact <= bound + 1e-12)
        ok &= good
        details.append(f"theta={theta:.4f}: {st.mean_match:.4f} vs {p:.4f} (3se {3 * se:.4f}), "
                       f"exact bias {exact:.5f} <= {bound:.5f}")
    criterion(2, "cheating Bob saturation", ok, "; ".join(details))
    assert ok


def test_criterion_3_single_round_cap(criterion):
    theta = math.pi / 4
    suite = [strategies.honest_single_round(theta), strategies.always_agree(theta), strategies.midpoint(theta)]
    suite += [strategies.random_single_round_strategy(k, dim_a=1 + k % 3, target=k % 2) for k in range(1000)]
    worst_cap = worst_sym = worst_q = -np.inf
    for s in suite:
        r = strategies.analyze_single_round(s, theta)
        worst_cap = max(worst_cap, r.E_q - r.cap)
        if s.dim_a <= 2:
            sym = strategies.symmetrize(s)
            r2 = strategies.analyze_single_round(sym, theta)
            worst_sym = max(worst_sym, abs(r2.E_f - r.E_f), abs(r2.E_q - r.E_q))
            cs = strategies.conditional_states(sym)
            worst_q = max(worst_q, abs(cs.q - cs.q_prime))
    ok = worst_cap <= 1e-9 and worst_sym <= 1e-9 and worst_q <= 1e-9
    criterion(3, "single-round cap", ok,
              f"{len(suite)} strategies; max E_q - cap = {worst_cap:.3g}; symmetrize drift {worst_sym:.3g}; "
              f"|q - q'| {worst_q:.3g}")
    assert ok


def test_criterion_4_martingale_tails(criterion):
    n, trials, theta = 100, 100_000, math.pi / 4
    params = ProtocolParams(n, theta, 0.9, PROTOCOL2, qcore.depolarizing_from_fidelity(0.97))
    details, ok = [], True
    for name in ("threshold", "parity_mix"):
        batch = harness.TrialBatch(params, strategies.make_alice(name, theta, n, 0.9),
                                   strategies.honest_bob(theta), trials, 4)
        assert strategies.as_table(batch.alice.policy, n).adaptive
        for c in harness.martingale_tail_check(batch, [1, 2, 3]):
            ok &= c.passed
            details.append(f"{name} l={c.l:g}: f {c.f_rate:.5f}, q {c.q_rate:.5f} <= "
                           f"{c.bound + 3 * c.sigma:.5f}")
    criterion(4, "martingale tails", ok, "; ".join(details))
    assert ok


def test_criterion_5_classical_exact_values(criterion):
    parts, ok = [], True
    for n in (2, 4, 6):
        t = classical.build_trivial(n)
        for c in (ALICE, BOB):
            eps = classical.average_bias(t, c)[0]
            hinf = classical.min_entropy(t, c)[0]
            h = classical.min_shannon_entropy(t, c).entropy
            ok &= abs(eps - 0.25) <= 1e-12 and abs(hinf - n / 2) <= 1e-12 and abs(h - n / 2) <= 1e-12
    parts.append("trivial n=2,4,6: eps 0.25, Hinf = H = n/2")
    s2 = classical.build_strikeout(2)
    h2a = classical.min_shannon_entropy(s2, ALICE, "exhaustive").entropy
    enum = oracles.strikeout_min_entropy(2, "A")[0]
    ok &= abs(h2a - enum) <= 1e-9 and abs(h2a - H_ONE_THIRD) <= 1e-9
    parts.append(f"strike-out n=2 H_A {h2a:.12f} vs enumeration {enum:.12f}")
    rep = classical.cheat_report(classical.build_strikeout(4))
    good4 = abs(rep.H_A - 2.39) <= 0.02 and abs(rep.H_B - 2.78) <= 0.02
    ok &= good4
    parts.append(f"strike-out n=4 {rep.method}: H_A {rep.H_A:.4f}, H_B {rep.H_B:.4f} "
                 f"({len(rep.strategy_tables['A'])}/{len(rep.strategy_tables['B'])} certificate rows)")
    criterion(5, "classical exact values", ok, "; ".join(parts))
    assert ok


def test_criterion_6_classical_impossibility(criterion):
    rng = np.random.default_rng(6)
    fails = {"bias": 0, "hinf": 0, "potential": 0}
    for k in range(100):
        n = int(rng.integers(1, 4))
        t = classical.random_tree(n, rng)
        u = classical.random_tree(n, rng, uniform_output=True)
        if classical.average_bias(t, ALICE)[0] + classical.average_bias(t, BOB)[0] < 0.5 - 1e-9:
            fails["bias"] += 1
        if min(classical.min_entropy(u, ALICE)[0], classical.min_entropy(u, BOB)[0]) > n / 2 + 1e-9:
            fails["hinf"] += 1
        for c in range(1 << n):
            f = classical.potential_sequence(t, c)
            if any(b > a + 1e-12 for a, b in zip(f, f[1:])):
                fails["potential"] += 1
    ok = not any(fails.values())
    criterion(6, "classical impossibility", ok, f"100 random trees of each kind; violations {fails}")
    assert ok


def test_criterion_7_noiseless_asymptotics(criterion):
    ns = [int(round(10 ** (k / 4))) for k in range(12, 37)]
    eps, gap = [], []
    mismatch = 0.0
    for n in ns:
        l = math.sqrt(math.log(n))
        e = bounds.alice_bias_bound(n, bounds.noiseless_bias_theta(n), 1.0, l, clamp=False)
        h = bounds.alice_entropy_bound(n, bounds.noiseless_entropy_theta(n), 1.0, l, clamp=False)
        mismatch = max(mismatch, abs(e / float(oracles.noiseless_bias_display(n)) - 1),
                       abs(h / float(oracles.noiseless_entropy_display(n)) - 1))
        eps.append(e)
        gap.append((n - h) / n)
    positive = min(eps) > 0 and min(gap) > 0
    monotone = all(b < a for a, b in zip(eps, eps[1:])) and all(b < a for a, b in zip(gap, gap[1:]))
    ok = positive and monotone and eps[-1] < 0.35 and gap[-1] < 0.35 and mismatch < 1e-9
    criterion(7, "noiseless asymptotics", ok,
              f"n=1e3..1e9 ({len(ns)} points): eps {eps[0]:.4f} -> {eps[-1]:.4f}, "
              f"(n-H)/n {gap[0]:.4f} -> {gap[-1]:.4f}; max deviation from explicit form {mismatch:.2g}")
    assert ok


def test_criterion_8_separation_witness(criterion, tmp_path):
    rc = cli.main(["threshold", "--sin2-theta", "0.5", "--n", "100000000", "--out", str(tmp_path)])
    row = json.loads((tmp_path / "threshold_report.json").read_text())["rows"][0]
    f = row["f_star"]
    theta = bounds.theta_from_sin2(0.5)
    l = math.sqrt(math.log(1e8))
    total = bounds.alice_bias_bound(10**8, theta, f, l) + bounds.bob_bias_bound(theta)
    root = float(oracles.threshold_root(10**8, 0.5, l))
    ok = (rc == 0 and isinstance(f, float) and f < 1.0 and total < 0.5
          and abs(f - row["closed_form_f_star"]) <= 1e-4 and abs(row["closed_form_f_star"] - THRESHOLD_1E8) <= 1e-12
          and abs(root - THRESHOLD_1E8) <= 1e-12)
    criterion(8, "quantum-classical separation", ok,
              f"f* = {f:.7f} (closed form {row['closed_form_f_star']:.7f}), eps_A + eps_B = {total:.6f} < 0.5")
    assert ok


ACCEPTANCE_RUNS = {
    "correctness": ["simulate", "--n", "1000", "--alice", "honest", "--bob", "honest", "--theta", "0.7853981633974483",
                    "--f-star", "0.9", "--channel-fidelity", "0.99", "--trials", "100000", "--seed", "1"],
    "helstrom": ["simulate", "--n", "100", "--alice", "honest", "--bob", "helstrom", "--theta", "0.5235987755982988",
                 "--trials", "1000", "--seed", "2"],
    "classical": ["classical", "--protocol", "strikeout", "--n", "4"],
    "bounds": ["bounds", "--regime", "noiseless", "--n", "1000,1000000,1000000000"],
    "threshold": ["threshold", "--sin2-theta", "0.5", "--n", "100000000"],
}


def _martingale_config(tmp_path):
    cfg = tmp_path / "martingale.yaml"
    cfg.write_text("schema_version: 1\nn: 100\ntheta: 0.7853981633974483\nf_star: 0.9\n"
                   "channel_fidelity: 0.97\nalice: threshold\nbob: honest\nvariant: Protocol2\n"
                   "trials: 100000\nseed: 4\nmartingale_l: [1, 2, 3]\n")
    return ["simulate", "--config", str(cfg)]


def test_criterion_9_determinism(criterion, tmp_path, monkeypatch):
    runs = dict(ACCEPTANCE_RUNS, martingale=_martingale_config(tmp_path))
    differing = []
    for name, args in runs.items():
        blobs = []
        for rep, threads in enumerate(("1", "4")):
            monkeypatch.setenv(harness.THREADS_ENV, threads)
            out = tmp_path / f"{name}-{rep}"
            assert cli.main([*args, "--out", str(out)]) == 0
            blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        if blobs[0] != blobs[1]:
            differing.append(name)
    ok = not differing
    criterion(9, "determinism", ok,
              f"{len(runs)} report sets rerun with 1 and 4 threads; differing: {differing or 'none'}")
    assert ok
