"""Classical bit-string generation protocols as finite game trees.

A protocol is an extensive-form game: each internal node belongs to one
mover (Alice or Bob), the honest behaviour of that mover is a probability
distribution over outgoing messages, and each leaf carries the n-bit output
string.  Output strings are integer codes with the first bit most
significant.

Every protocol is flattened into a :class:`GameGraph` (CSR arrays, children
numbered before parents) so the same backward-induction kernels serve small
explicit trees and the 65536-state strike-out game alike.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels

ALICE, BOB = 0, 1
_MOVER = {"A": ALICE, "B": BOB, ALICE: ALICE, BOB: BOB}
EXHAUSTIVE_LIMIT = 100_000


def mover_code(m) -> int:
    try:
        return _MOVER[m]
    except KeyError:
        raise ValueError(f"mover must be 'A' or 'B', got {m!r}") from None


def bitstring(code: int, n: int) -> str:
    return format(code, f"0{n}b") if n else ""


def match_fraction(code: int, target: int, n: int) -> float:
    return (n - bin((code ^ target) & ((1 << n) - 1)).count("1")) / n


@dataclass(frozen=True, eq=False)
class GameGraph:
    n_bits: int
    mover: np.ndarray        # uint8 per node
    child_ptr: np.ndarray    # int64, len n_nodes + 1
    child_idx: np.ndarray    # int32 per edge
    child_prob: np.ndarray   # float64 per edge, honest move distribution
    leaf_out: np.ndarray     # int32 per node, -1 for internal nodes
    depth: np.ndarray        # int32 per node, messages sent before reaching it
    root: int
    edge_label: np.ndarray   # int32 per edge, protocol-specific message label

    @property
    def n_nodes(self) -> int:
        return len(self.mover)

    @cached_property
    def is_leaf(self) -> np.ndarray:
        return self.child_ptr[1:] == self.child_ptr[:-1]

    def cheater_mask(self, cheater) -> np.ndarray:
        if cheater is None:
            return np.zeros(self.n_nodes, dtype=np.uint8)
        c = mover_code(cheater)
        return ((self.mover == c) & ~self.is_leaf).astype(np.uint8)

    def children(self, v: int) -> range:
        return range(int(self.child_ptr[v]), int(self.child_ptr[v + 1]))


# -- explicit trees ---------------------------------------------------------

@dataclass(frozen=True)
class Leaf:
    output: int


@dataclass(frozen=True)
class Node:
    mover: str
    children: tuple
    probs: tuple | None = None   # uniform when omitted
    labels: tuple | None = None


class ProtocolTree:
    """A classical protocol given as an explicit tree of :class:`Node` / :class:`Leaf`."""

    def __init__(self, n: int, root, name: str = "custom", bit_symmetric: bool = False):
        self.n = n
        self.root = root
        self.name = name
        self.bit_symmetric = bit_symmetric
        self._validate(root)

    def _validate(self, node) -> None:
        stack = [node]
        while stack:
            x = stack.pop()
            if isinstance(x, Leaf):
                if not (0 <= x.output < (1 << self.n)):
                    raise ValueError(f"leaf output {x.output} is not an {self.n}-bit string")
                continue
            mover_code(x.mover)
            if not x.children:
                raise ValueError("internal node without outgoing messages")
            if x.probs is not None:
                if len(x.probs) != len(x.children) or min(x.probs) < 0:
                    raise ValueError("honest move distribution does not match the node's messages")
                if abs(sum(x.probs) - 1.0) > 1e-12:
                    raise ValueError(f"honest move distribution sums to {sum(x.probs)}")
            if x.labels is not None and len(x.labels) != len(x.children):
                raise ValueError("one label per message required")
            stack.extend(x.children)

    @cached_property
    def graph(self) -> GameGraph:
        movers, ptr_lens, kids, probs, labels, outs, depths = [], [], [], [], [], [], []

        def visit(x, d):
            if isinstance(x, Leaf):
                child_ids = []
            else:
                child_ids = [visit(c, d + 1) for c in x.children]
            v = len(movers)
            if isinstance(x, Leaf):
                movers.append(ALICE)
                outs.append(x.output)
                ptr_lens.append(0)
            else:
                k = len(x.children)
                movers.append(mover_code(x.mover))
                outs.append(-1)
                ptr_lens.append(k)
                kids.append(child_ids)
                probs.append(list(x.probs) if x.probs is not None else [1.0 / k] * k)
                labels.append(list(x.labels) if x.labels is not None else list(range(k)))
            depths.append(d)
            return v

        root = visit(self.root, 0)
        # edges must be stored in node order; internal nodes appended kids in visit order
        edge_kids, edge_probs, edge_labels = [], [], []
        it = iter(zip(kids, probs, labels))
        for k in ptr_lens:
            if k:
                ck, cp, cl = next(it)
                edge_kids += ck
                edge_probs += cp
                edge_labels += cl
        ptr = np.concatenate([[0], np.cumsum(ptr_lens)]).astype(np.int64)
        return GameGraph(
            n_bits=self.n,
            mover=np.array(movers, dtype=np.uint8),
            child_ptr=ptr,
            child_idx=np.array(edge_kids, dtype=np.int32),
            child_prob=np.array(edge_probs, dtype=np.float64),
            leaf_out=np.array(outs, dtype=np.int32),
            depth=np.array(depths, dtype=np.int32),
            root=root,
            edge_label=np.array(edge_labels, dtype=np.int32),
        )

    def default_strategy(self, cheater) -> np.ndarray:
        """Best response to a lexicographic preference over output strings."""
        g = self.graph
        leaf_value = np.where(g.leaf_out >= 0, g.leaf_out, 0).astype(np.float64)
        _, pick = kernels.dag_backward(g.child_ptr, g.child_idx, g.child_prob,
                                       g.cheater_mask(cheater), leaf_value, -1)
        return pick

    def describe_state(self, v: int) -> str:
        return f"node{v}"

    def describe_move(self, label: int) -> str:
        return str(label)

    def to_dict(self) -> dict:
        def enc(x):
            if isinstance(x, Leaf):
                return {"leaf": bitstring(x.output, self.n)}
            d = {"mover": x.mover, "children": [enc(c) for c in x.children]}
            if x.probs is not None:
                d["probs"] = list(x.probs)
            if x.labels is not None:
                d["labels"] = list(x.labels)
            return d

        return {"n": self.n, "name": self.name, "bit_symmetric": self.bit_symmetric, "root": enc(self.root)}

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolTree":
        def dec(x):
            if "leaf" in x:
                return Leaf(int(x["leaf"], 2) if x["leaf"] else 0)
            return Node(
                x["mover"],
                tuple(dec(c) for c in x["children"]),
                tuple(x["probs"]) if "probs" in x else None,
                tuple(x["labels"]) if "labels" in x else None,
            )

        return cls(int(d["n"]), dec(d["root"]), d.get("name", "custom"), bool(d.get("bit_symmetric", False)))


def build_trivial(n: int) -> ProtocolTree:
    """Alice announces the first n/2 bits one at a time, then Bob the rest."""
    if n < 2 or n % 2:
        raise ValueError(f"trivial protocol needs an even n >= 2, got {n}")
    if n > 16:
        raise ValueError("explicit trivial tree limited to n <= 16")

    def grow(prefix: int, depth: int):
        if depth == n:
            return Leaf(prefix)
        mover = "A" if depth < n // 2 else "B"
        return Node(mover, (grow(prefix << 1, depth + 1), grow((prefix << 1) | 1, depth + 1)),
                    (0.5, 0.5), (0, 1))

    return ProtocolTree(n, grow(0, 0), name="trivial", bit_symmetric=True)


# -- strike-out protocol ----------------------------------------------------

class StrikeoutTree:
    """Alternating elimination of candidate strings, Alice first.

    States are survivor sets (bitmasks over the 2^n strings); the future of
    the game depends only on that set, so the game is a DAG with 2^(2^n)
    nodes and the mover is fixed by how many strings are left.
    """

    name = "strikeout"
    bit_symmetric = True

    def __init__(self, n: int):
        if not (1 <= n <= 4):
            raise ValueError(f"exact strike-out analysis supports 1 <= n <= 4, got {n}")
        self.n = n
        self.n_strings = 1 << n

    @cached_property
    def graph(self) -> GameGraph:
        m = self.n_strings
        masks = np.arange(1 << m, dtype=np.int64)
        bits = ((masks[:, None] >> np.arange(m)) & 1).astype(bool)
        pc = bits.sum(axis=1)
        internal = pc >= 2
        counts = np.where(internal, pc, 0)
        ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        rows, cols = np.nonzero(bits & internal[:, None])
        child_idx = (masks[rows] ^ (1 << cols)).astype(np.int32)
        child_prob = 1.0 / pc[rows]
        struck = m - pc
        mover = np.where(struck % 2 == 0, ALICE, BOB).astype(np.uint8)
        leaf_out = np.full(len(masks), -1, dtype=np.int32)
        single = pc == 1
        leaf_out[single] = np.argmax(bits[single], axis=1)
        leaf_out[0] = 0  # empty set: unreachable placeholder leaf
        return GameGraph(
            n_bits=self.n, mover=mover, child_ptr=ptr, child_idx=child_idx,
            child_prob=child_prob.astype(np.float64), leaf_out=leaf_out,
            depth=(m - pc).astype(np.int32), root=int(masks[-1]),
            edge_label=cols.astype(np.int32),
        )

    def default_strategy(self, cheater) -> np.ndarray:
        """Rank preference: always strike the lexicographically last survivor."""
        g = self.graph
        pick = np.full(g.n_nodes, -1, dtype=np.int32)
        mask = g.cheater_mask(cheater).astype(bool)
        pick[mask] = (g.child_ptr[1:][mask] - 1).astype(np.int32)
        return pick

    def describe_state(self, v: int) -> str:
        return " ".join(bitstring(s, self.n) for s in range(self.n_strings) if v >> s & 1)

    def describe_move(self, label: int) -> str:
        return bitstring(label, self.n)


def build_strikeout(n: int) -> StrikeoutTree:
    return StrikeoutTree(n)


# -- analysis ---------------------------------------------------------------

def _targets(tree, limit_bits: int = 4) -> Sequence[int]:
    n = tree.n
    if n <= limit_bits or not tree.bit_symmetric:
        if n > 12:
            raise ValueError("target enumeration limited to n <= 12")
        return range(1 << n)
    return (0,)


def _backward(tree, cheater, leaf_value, sense=1):
    g = tree.graph
    return kernels.dag_backward(g.child_ptr, g.child_idx, g.child_prob,
                                g.cheater_mask(cheater), leaf_value, sense)


def _match_leaf_values(g: GameGraph, target: int) -> np.ndarray:
    n = g.n_bits
    out = np.where(g.leaf_out >= 0, g.leaf_out, 0)
    diff = (out ^ target) & ((1 << n) - 1)
    mism = np.zeros_like(diff)
    for b in range(n):
        mism += (diff >> b) & 1
    return ((n - mism) / n).astype(np.float64)


def max_match_bias(tree, cheater, target: int) -> float:
    """Largest expected fraction of the honest party's output bits equal to ``target``."""
    g = tree.graph
    values, _ = _backward(tree, cheater, _match_leaf_values(g, target))
    return float(values[g.root])


def average_bias(tree, cheater) -> tuple[float, int]:
    """(epsilon, maximising target) for the given cheater."""
    best, best_c = -1.0, 0
    for c in _targets(tree):
        v = max_match_bias(tree, cheater, c)
        if v > best + 1e-15:
            best, best_c = v, c
    return best - 0.5, best_c


def max_string_prob(tree, cheater, target: int) -> float:
    """Largest probability the cheater can force on the single output ``target``."""
    g = tree.graph
    leaf_value = (g.leaf_out == target).astype(np.float64)
    values, _ = _backward(tree, cheater, leaf_value)
    return float(values[g.root])


def min_entropy(tree, cheater) -> tuple[float, int]:
    """(min-entropy in bits, most forceable output) for the given cheater."""
    outputs = np.unique(tree.graph.leaf_out[tree.graph.leaf_out >= 0])
    if tree.bit_symmetric and tree.n > 4:
        outputs = outputs[:1]
    best, best_c = 0.0, 0
    for c in outputs.tolist():
        p = max_string_prob(tree, cheater, c)
        if p > best:
            best, best_c = p, c
    return -math.log2(best), best_c


def honest_reach(tree) -> np.ndarray:
    g = tree.graph
    none = np.zeros(g.n_nodes, dtype=np.uint8)
    return kernels.dag_reach(g.child_ptr, g.child_idx, g.child_prob, none,
                             np.full(g.n_nodes, -1, dtype=np.int32), g.root)


def potential_sequence(tree, target: int) -> list[float]:
    """Level sums of w(U) Z_A(U) Z_B(U) after each round of communication.

    w is the honest probability of reaching state U, Z_A the best a cheating
    Bob can do to force Alice's output to ``target`` from U, and Z_B the same
    for a cheating Alice.  Protocol states that ended earlier are carried to
    later levels.  Entry 0 is the product of both cheaters' optima, the last
    entry the honest probability of ``target``.
    """
    g = tree.graph
    w = honest_reach(tree)
    leaf_value = (g.leaf_out == target).astype(np.float64)
    z_alice_out, _ = _backward(tree, BOB, leaf_value)
    z_bob_out, _ = _backward(tree, ALICE, leaf_value)
    term = w * z_alice_out * z_bob_out
    live = w > 0
    depth = g.depth
    last = int(depth[live].max())
    seq = []
    for j in range(last + 1):
        sel = live & ((depth == j) | (g.is_leaf & (depth < j)))
        seq.append(float(term[sel].sum()))
    return seq


def output_distribution(tree, cheater=None, pick=None, behaviour=None) -> np.ndarray:
    """Output distribution of the honest party.

    ``pick`` fixes a deterministic cheater strategy (CSR positions);
    ``behaviour`` replaces the cheater's move probabilities edge-wise for a
    randomised strategy.  With neither, both parties are honest.
    """
    g = tree.graph
    n_out = 1 << tree.n
    if behaviour is not None:
        probs = np.where(np.repeat(g.cheater_mask(cheater), np.diff(g.child_ptr)).astype(bool),
                         behaviour, g.child_prob)
        d = kernels.dag_distributions(g.child_ptr, g.child_idx, probs.astype(np.float64),
                                      np.zeros(g.n_nodes, np.uint8), np.full(g.n_nodes, -1, np.int32),
                                      np.where(g.leaf_out >= 0, g.leaf_out, 0).astype(np.int32), n_out)
        return d[g.root]
    mask = g.cheater_mask(cheater)
    if pick is None:
        pick = np.full(g.n_nodes, -1, dtype=np.int32)
        mask = np.zeros(g.n_nodes, dtype=np.uint8)
    d = kernels.dag_distributions(g.child_ptr, g.child_idx, g.child_prob, mask, pick,
                                  np.where(g.leaf_out >= 0, g.leaf_out, 0).astype(np.int32), n_out)
    return d[g.root]


def shannon_entropy(p) -> float:
    return float(kernels.entropy_bits(np.ascontiguousarray(p, dtype=np.float64)))


@dataclass
class EntropyResult:
    entropy: float
    distribution: np.ndarray
    method: str
    sweeps: int = 0
    table: list = field(default_factory=list)   # rows (state, chosen message)


def count_deterministic_strategies(tree, cheater) -> int:
    """Number of distinct history-dependent deterministic cheater strategies (saturating)."""
    g = tree.graph
    mask = g.cheater_mask(cheater)
    cnt = np.ones(g.n_nodes, dtype=object)
    cap = 10 ** 18
    for v in range(g.n_nodes):
        ch = g.children(v)
        if not ch:
            continue
        sub = [cnt[g.child_idx[j]] for j in ch]
        c = sum(sub) if mask[v] else math.prod(sub)
        cnt[v] = min(c, cap)
    return int(cnt[g.root])


def _exhaustive(tree, cheater) -> EntropyResult:
    g = tree.graph
    if count_deterministic_strategies(tree, cheater) > EXHAUSTIVE_LIMIT:
        raise ValueError(
            f"exhaustive search over more than {EXHAUSTIVE_LIMIT} deterministic strategies requested"
        )
    n_out = 1 << tree.n
    mask = g.cheater_mask(cheater)
    memo: dict[int, list] = {}

    def options(v):
        # list of (distribution, plan); plan is (choice position, subplan) or tuple of subplans
        if v in memo:
            return memo[v]
        ch = g.children(v)
        if not ch:
            e = np.zeros(n_out)
            e[g.leaf_out[v]] = 1.0
            res = [(e, None)]
        elif mask[v]:
            res = [(d, (j, plan)) for j in ch for d, plan in options(int(g.child_idx[j]))]
        else:
            subs = [options(int(g.child_idx[j])) for j in ch]
            res = []
            for combo in itertools.product(*subs):
                d = sum(g.child_prob[j] * c[0] for j, c in zip(ch, combo))
                res.append((d, tuple(c[1] for c in combo)))
        memo[v] = res
        return res

    best_h, best = math.inf, None
    for d, plan in options(g.root):
        h = shannon_entropy(d)
        if h < best_h - 1e-15:
            best_h, best = h, (d, plan)

    table = []

    def unroll(v, plan, history):
        ch = g.children(v)
        if not ch:
            return
        if mask[v]:
            j, sub = plan
            table.append((tree.describe_state(v), "/".join(history), tree.describe_move(int(g.edge_label[j]))))
            unroll(int(g.child_idx[j]), sub, history + [tree.describe_move(int(g.edge_label[j]))])
        else:
            for j, sub in zip(ch, plan):
                unroll(int(g.child_idx[j]), sub, history + [tree.describe_move(int(g.edge_label[j]))])

    unroll(g.root, best[1], [])
    return EntropyResult(best_h, best[0], "exhaustive", table=table)


def _greedy_local(tree, cheater, max_sweeps: int = 10_000) -> EntropyResult:
    g = tree.graph
    mask = g.cheater_mask(cheater)
    pick = tree.default_strategy(cheater).astype(np.int32).copy()
    leaf_out = np.where(g.leaf_out >= 0, g.leaf_out, 0).astype(np.int32)
    n_out = 1 << tree.n
    sweeps = 0
    while True:
        d = kernels.dag_distributions(g.child_ptr, g.child_idx, g.child_prob, mask, pick, leaf_out, n_out)
        reach = kernels.dag_reach(g.child_ptr, g.child_idx, g.child_prob, mask, pick, g.root)
        p = np.ascontiguousarray(d[g.root])
        h, v, pos = kernels.local_search_best(g.child_ptr, g.child_idx, mask, pick, reach, d, p)
        if v < 0 or sweeps >= max_sweeps:
            break
        pick[v] = pos
        sweeps += 1
    table = [
        (tree.describe_state(v), "", tree.describe_move(int(g.edge_label[pick[v]])))
        for v in np.flatnonzero((reach > 0) & (mask != 0)).tolist()
    ]
    return EntropyResult(shannon_entropy(p), p, "greedy_local", sweeps=sweeps, table=table)


def min_shannon_entropy(tree, cheater, method: str = "greedy_local") -> EntropyResult:
    """Smallest entropy of the honest party's output a cheater can achieve.

    Only deterministic strategies are searched: entropy is concave and the
    achievable distributions form a polytope whose vertices are deterministic
    strategies.  ``exhaustive`` enumerates every history-dependent
    deterministic strategy; ``greedy_local`` starts from the tree's default
    strategy (rank preference for strike-out) and applies best single-decision
    improvements on state-based strategies until none remains.
    """
    if method == "exhaustive":
        return _exhaustive(tree, cheater)
    if method == "greedy_local":
        return _greedy_local(tree, cheater)
    raise ValueError(f"unknown method {method!r}")


@dataclass
class CheatReport:
    protocol: str
    n: int
    eps_A: float
    eps_B: float
    Hinf_A: float
    Hinf_B: float
    H_A: float
    H_B: float
    method: str
    exact: dict
    targets: dict = field(default_factory=dict)
    strategy_tables: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol, "n": self.n,
            "eps_A": self.eps_A, "eps_B": self.eps_B, "eps_sum": self.eps_A + self.eps_B,
            "Hinf_A": self.Hinf_A, "Hinf_B": self.Hinf_B,
            "H_A": self.H_A, "H_B": self.H_B,
            "method": self.method, "exact": self.exact, "targets": self.targets,
        }


def cheat_report(tree, method: str = "greedy_local") -> CheatReport:
    eps_a, ca = average_bias(tree, ALICE)
    eps_b, cb = average_bias(tree, BOB)
    hinf_a, ma = min_entropy(tree, ALICE)
    hinf_b, mb = min_entropy(tree, BOB)
    ha = min_shannon_entropy(tree, ALICE, method)
    hb = min_shannon_entropy(tree, BOB, method)
    n = tree.n
    return CheatReport(
        protocol=tree.name, n=n, eps_A=eps_a, eps_B=eps_b, Hinf_A=hinf_a, Hinf_B=hinf_b,
        H_A=ha.entropy, H_B=hb.entropy, method=method,
        exact={"bias": True, "min_entropy": True, "shannon": method == "exhaustive"},
        targets={"eps_A": bitstring(ca, n), "eps_B": bitstring(cb, n),
                 "Hinf_A": bitstring(ma, n), "Hinf_B": bitstring(mb, n)},
        strategy_tables={"A": ha.table, "B": hb.table},
    )


def random_tree(n: int, rng: np.random.Generator, max_arity: int = 4, max_depth: int = 4,
                uniform_output: bool = False) -> ProtocolTree:
    """Random protocol tree; ``uniform_output`` makes the honest output uniform over all strings."""
    if uniform_output:
        def split(strings, depth):
            if len(strings) == 1:
                return Leaf(int(strings[0]))
            k = int(rng.integers(2, min(max_arity, len(strings)) + 1))
            perm = rng.permutation(strings)
            cuts = np.sort(rng.choice(np.arange(1, len(strings)), size=k - 1, replace=False))
            parts = np.split(perm, cuts)
            probs = tuple(len(p) / len(strings) for p in parts)
            return Node("AB"[int(rng.integers(2))], tuple(split(p, depth + 1) for p in parts), probs)

        return ProtocolTree(n, split(np.arange(1 << n), 0), name="random-uniform")

    def grow(depth):
        if depth >= max_depth or (depth > 0 and rng.random() < 0.3):
            return Leaf(int(rng.integers(1 << n)))
        k = int(rng.integers(1, max_arity + 1))
        w = rng.random(k) + 0.05
        probs = tuple((w / w.sum()).tolist())
        probs = probs[:-1] + (1.0 - sum(probs[:-1]),)
        return Node("AB"[int(rng.integers(2))], tuple(grow(depth + 1) for _ in range(k)), probs)

    return ProtocolTree(n, grow(0), name="random")
