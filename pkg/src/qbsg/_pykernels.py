"""Reference implementations of the hot kernels (numpy / pure Python).

The compiled module ``_ckernels`` implements the same functions with the
same floating-point operation order, so both backends return bit-identical
results.  Graph kernels expect nodes numbered so that every child has a
smaller index than its parent (children-first order).
"""
from __future__ import annotations

import math

import numpy as np

OUTPUT_BITS = 63


def sample_rounds(uniforms, cum, choice, targets, ef, fb):
    """Sample protocol rounds from tabulated per-round outcome distributions.

    ``cum[k, t]`` holds cumulative probabilities over the four cells
    2*f + q for menu strategy k aimed at target bit t; ``choice[i, s]``
    selects the strategy for round i after s passed tests.  Returns per-trial
    (sum_f, sum_q, code, sum_ef, sum_fb) where ``code`` packs the honest
    party's output bits of the first 63 rounds, first round most
    significant.
    """
    trials, n = uniforms.shape
    sum_f = np.zeros(trials, dtype=np.int64)
    sum_q = np.zeros(trials, dtype=np.int64)
    code = np.zeros(trials, dtype=np.uint64)
    sum_ef = np.zeros(trials, dtype=np.float64)
    sum_fb = np.zeros(trials, dtype=np.float64)
    one = np.uint64(1)
    for i in range(n):
        k = choice[i, sum_f]
        t = int(targets[i])
        c = cum[k, t]
        u = uniforms[:, i]
        cell = (u >= c[:, 0]).astype(np.int64) + (u >= c[:, 1]) + (u >= c[:, 2])
        f = cell >> 1
        q = cell & 1
        sum_ef += ef[k]
        sum_fb += fb[k]
        sum_f += f
        sum_q += q
        if i < OUTPUT_BITS:
            bit = (q if t == 1 else 1 - q).astype(np.uint64)
            code = (code << one) | bit
    return sum_f, sum_q, code, sum_ef, sum_fb


def dag_backward(child_ptr, child_idx, child_prob, cheater, leaf_value, sense):
    """Backward induction: cheater nodes optimise, honest nodes average.

    ``sense`` is +1 to maximise, -1 to minimise.  Ties keep the earliest
    child.  Returns (value per node, chosen CSR position or -1).
    """
    n_nodes = len(cheater)
    value = np.zeros(n_nodes, dtype=np.float64)
    pick = np.full(n_nodes, -1, dtype=np.int32)
    ptr = child_ptr.tolist()
    idx = child_idx.tolist()
    prob = child_prob.tolist()
    leafv = leaf_value.tolist()
    val = [0.0] * n_nodes
    for v in range(n_nodes):
        lo, hi = ptr[v], ptr[v + 1]
        if lo == hi:
            val[v] = leafv[v]
        elif cheater[v]:
            best = val[idx[lo]]
            bpos = lo
            for j in range(lo + 1, hi):
                x = val[idx[j]]
                if (x > best) if sense > 0 else (x < best):
                    best = x
                    bpos = j
            val[v] = best
            pick[v] = bpos
        else:
            acc = 0.0
            for j in range(lo, hi):
                acc += prob[j] * val[idx[j]]
            val[v] = acc
    value[:] = val
    return value, pick


def dag_reach(child_ptr, child_idx, child_prob, cheater, pick, root):
    """Probability of visiting each node when the cheater follows ``pick``."""
    n_nodes = len(cheater)
    reach = [0.0] * n_nodes
    reach[root] = 1.0
    ptr = child_ptr.tolist()
    idx = child_idx.tolist()
    prob = child_prob.tolist()
    for v in range(root, -1, -1):
        r = reach[v]
        if r == 0.0:
            continue
        lo, hi = ptr[v], ptr[v + 1]
        if lo == hi:
            continue
        if cheater[v]:
            c = idx[pick[v]]
            reach[c] += r
        else:
            for j in range(lo, hi):
                reach[idx[j]] += r * prob[j]
    return np.array(reach, dtype=np.float64)


def dag_distributions(child_ptr, child_idx, child_prob, cheater, pick, leaf_out, n_out):
    """Output distribution of the subgame rooted at every node."""
    n_nodes = len(cheater)
    d = np.zeros((n_nodes, n_out), dtype=np.float64)
    ptr = child_ptr.tolist()
    idx = child_idx.tolist()
    prob = child_prob.tolist()
    for v in range(n_nodes):
        lo, hi = ptr[v], ptr[v + 1]
        if lo == hi:
            d[v, leaf_out[v]] = 1.0
        elif cheater[v]:
            d[v] = d[idx[pick[v]]]
        else:
            acc = np.zeros(n_out)
            for j in range(lo, hi):
                acc += prob[j] * d[idx[j]]
            d[v] = acc
    return d


def entropy_bits(p) -> float:
    h = 0.0
    for x in p:
        if x > 0.0:
            h -= x * math.log2(x)
    return h


def local_search_best(child_ptr, child_idx, cheater, pick, reach, d, p_root):
    """Best single-decision change to the cheater's strategy for lowering entropy.

    Returns (entropy, node, CSR position); node is -1 when no change lowers
    the entropy of ``p_root`` by more than 1e-12.
    """
    h0 = entropy_bits(p_root)
    best_h, best_v, best_pos = h0 - 1e-12, -1, -1
    ptr = child_ptr.tolist()
    for v in np.flatnonzero((reach > 0.0) & (cheater != 0)).tolist():
        lo, hi = ptr[v], ptr[v + 1]
        if hi - lo < 2:
            continue
        r = reach[v]
        cur = d[child_idx[pick[v]]]
        for j in range(lo, hi):
            if j == pick[v]:
                continue
            trial = p_root + r * (d[child_idx[j]] - cur)
            h = entropy_bits(trial.tolist())
            if h < best_h:
                best_h, best_v, best_pos = h, v, j
    if best_v < 0:
        return h0, -1, -1
    return best_h, best_v, best_pos
