import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from qbsg import classical
from qbsg.classical import ALICE, BOB, Leaf, Node, ProtocolTree

# h(1/3), the strike-out n=2 minimum for a cheating Alice (tests/oracles.py enumeration)
H_ONE_THIRD = 0.9182958340544896
STRIKEOUT2_H_B = 1.561278124459133


def _direct_value(node, cheater, leaf_value, n):
    """Backward induction straight on the Node/Leaf structure."""
    if isinstance(node, Leaf):
        return leaf_value(node.output)
    vals = [_direct_value(c, cheater, leaf_value, n) for c in node.children]
    if node.mover == cheater:
        return max(vals)
    probs = node.probs or (1.0 / len(vals),) * len(vals)
    return sum(p * v for p, v in zip(probs, vals))


def _direct_bias(tree, cheater):
    n = tree.n
    best = 0.0
    for c in range(1 << n):
        def match(out, c=c):
            return sum(((out ^ c) >> b) & 1 == 0 for b in range(n)) / n
        best = max(best, _direct_value(tree.root, cheater, match, n))
    return best - 0.5


def _direct_hinf(tree, cheater):
    best = max(_direct_value(tree.root, cheater, lambda o, c=c: float(o == c), tree.n)
               for c in range(1 << tree.n))
    return -math.log2(best)


def _random_behaviour(tree, cheater, rng):
    g = tree.graph
    mask = g.cheater_mask(cheater)
    beh = g.child_prob.copy()
    for v in np.flatnonzero(mask):
        ch = g.children(int(v))
        beh[ch.start:ch.stop] = rng.dirichlet(np.full(len(ch), 0.3))
    return beh


@pytest.mark.parametrize("n", [2, 4, 6])
def test_trivial_protocol_exact(n):
    t = classical.build_trivial(n)
    for cheater in (ALICE, BOB):
        eps, _ = classical.average_bias(t, cheater)
        hinf, _ = classical.min_entropy(t, cheater)
        h = classical.min_shannon_entropy(t, cheater).entropy
        assert eps == pytest.approx(0.25, abs=1e-12)
        assert hinf == pytest.approx(n / 2, abs=1e-12)
        assert h == pytest.approx(n / 2, abs=1e-12)


def test_trivial_two_bits_against_oracle():
    t = classical.build_trivial(2)
    assert classical.max_match_bias(t, ALICE, 0) == pytest.approx(oracles.trivial2_match_value("A"))
    assert classical.max_match_bias(t, BOB, 0) == pytest.approx(oracles.trivial2_match_value("B"))
    assert classical.potential_sequence(t, 0) == pytest.approx([0.25, 0.25, 0.25])


def test_trivial_rejects_odd_n():
    with pytest.raises(ValueError):
        classical.build_trivial(3)


def test_strikeout_two_bits_exhaustive_against_enumeration():
    t = classical.build_strikeout(2)
    ha = classical.min_shannon_entropy(t, ALICE, "exhaustive")
    hb = classical.min_shannon_entropy(t, BOB, "exhaustive")
    oa, count_a = oracles.strikeout_min_entropy(2, "A")
    ob, _ = oracles.strikeout_min_entropy(2, "B")
    assert abs(ha.entropy - oa) <= 1e-9 and abs(ha.entropy - H_ONE_THIRD) <= 1e-9
    assert abs(hb.entropy - ob) <= 1e-9 and abs(hb.entropy - STRIKEOUT2_H_B) <= 1e-9
    assert count_a == classical.count_deterministic_strategies(t, ALICE)
    assert ha.distribution.sum() == pytest.approx(1.0)
    assert ha.table


def test_strikeout_greedy_matches_exhaustive_at_two_bits():
    t = classical.build_strikeout(2)
    for c in (ALICE, BOB):
        g = classical.min_shannon_entropy(t, c, "greedy_local").entropy
        e = classical.min_shannon_entropy(t, c, "exhaustive").entropy
        assert g >= e - 1e-12
        assert g == pytest.approx(e, abs=1e-12)


def test_strikeout_one_bit():
    t = classical.build_strikeout(1)
    assert classical.min_shannon_entropy(t, ALICE, "exhaustive").entropy == pytest.approx(0.0)
    assert oracles.strikeout_min_entropy(1, "A")[0] == pytest.approx(0.0)


def test_strikeout_potential_is_flat_at_two_bits():
    assert classical.potential_sequence(classical.build_strikeout(2), 0) == pytest.approx([0.25] * 4)


def test_strikeout_size_limits():
    with pytest.raises(ValueError):
        classical.build_strikeout(5)
    with pytest.raises(ValueError):
        classical.min_shannon_entropy(classical.build_strikeout(3), ALICE, "exhaustive")
    with pytest.raises(ValueError):
        classical.min_shannon_entropy(classical.build_strikeout(2), ALICE, "annealing")


def test_strikeout_honest_output_uniform():
    for n in (2, 3):
        d = classical.output_distribution(classical.build_strikeout(n))
        assert np.allclose(d, 1 / (1 << n))


@pytest.mark.parametrize("cheater", [ALICE, BOB])
def test_random_behaviour_never_beats_deterministic_minimum(cheater):
    t = classical.build_strikeout(2)
    best = classical.min_shannon_entropy(t, cheater, "exhaustive").entropy
    rng = np.random.default_rng(1)
    for _ in range(500):
        d = classical.output_distribution(t, cheater, behaviour=_random_behaviour(t, cheater, rng))
        assert d.sum() == pytest.approx(1.0)
        assert classical.shannon_entropy(d) >= best - 1e-12


def test_strikeout_three_bits_greedy_upper_bounds_deterministic_samples():
    t = classical.build_strikeout(3)
    r = classical.min_shannon_entropy(t, ALICE)
    assert 0.0 < r.entropy < 3.0
    assert r.entropy >= classical.min_entropy(t, ALICE)[0] - 1e-12


def test_cheat_report_fields():
    rep = classical.cheat_report(classical.build_strikeout(2), "exhaustive")
    d = rep.to_dict()
    assert d["eps_sum"] == pytest.approx(d["eps_A"] + d["eps_B"])
    assert d["exact"]["shannon"] is True
    json.dumps(d)
    assert set(rep.strategy_tables) == {"A", "B"}


def test_tree_validation_and_round_trip():
    with pytest.raises(ValueError):
        ProtocolTree(1, Leaf(2))
    with pytest.raises(ValueError):
        ProtocolTree(1, Node("A", (Leaf(0), Leaf(1)), (0.4, 0.4)))
    with pytest.raises(ValueError):
        ProtocolTree(1, Node("C", (Leaf(0),)))
    t = classical.random_tree(2, np.random.default_rng(0))
    back = ProtocolTree.from_dict(t.to_dict())
    for c in (ALICE, BOB):
        assert classical.average_bias(back, c)[0] == pytest.approx(classical.average_bias(t, c)[0])


def _trees(seed_base, count, uniform):
    rng = np.random.default_rng(seed_base)
    out = []
    for _ in range(count):
        n = int(rng.integers(1, 4))
        out.append(classical.random_tree(n, rng, uniform_output=uniform))
    return out


def test_random_trees_match_direct_recursion():
    for t in _trees(5, 30, False) + _trees(6, 30, True):
        for c, mover in ((ALICE, "A"), (BOB, "B")):
            assert classical.average_bias(t, c)[0] == pytest.approx(_direct_bias(t, mover), abs=1e-12)
            assert classical.min_entropy(t, c)[0] == pytest.approx(_direct_hinf(t, mover), abs=1e-12)


def test_random_trees_bias_sum_floor():
    for t in _trees(11, 100, False):
        assert classical.average_bias(t, ALICE)[0] + classical.average_bias(t, BOB)[0] >= 0.5 - 1e-9


def test_random_uniform_trees_min_entropy_ceiling():
    for t in _trees(12, 100, True):
        assert np.allclose(classical.output_distribution(t), 1 / (1 << t.n))
        hinf = min(classical.min_entropy(t, ALICE)[0], classical.min_entropy(t, BOB)[0])
        assert hinf <= t.n / 2 + 1e-9


def test_random_trees_potential_nonincreasing():
    for t in _trees(13, 100, False):
        for c in range(1 << t.n):
            f = classical.potential_sequence(t, c)
            assert all(b <= a + 1e-12 for a, b in zip(f, f[1:]))
            assert f[-1] == pytest.approx(classical.output_distribution(t)[c], abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_greedy_never_below_exhaustive_on_small_trees(seed):
    t = classical.random_tree(2, np.random.default_rng(seed), max_arity=3, max_depth=3)
    for c in (ALICE, BOB):
        if classical.count_deterministic_strategies(t, c) > 5000:
            continue
        g = classical.min_shannon_entropy(t, c).entropy
        e = classical.min_shannon_entropy(t, c, "exhaustive").entropy
        assert g >= e - 1e-12


def test_trivial_two_bit_tree_shape():
    g = classical.build_trivial(2).graph
    assert int(g.is_leaf.sum()) == 4
    assert int(g.depth.max()) == 2
    assert sorted(g.leaf_out[g.is_leaf].tolist()) == [0, 1, 2, 3]


def test_single_leaf_tree():
    t = ProtocolTree(3, Leaf(0b101))
    assert classical.max_match_bias(t, ALICE, 0b100) == pytest.approx(2 / 3)
    assert classical.max_match_bias(t, BOB, 0b101) == 1.0


def test_potential_constant_without_choices():
    chain = Node("A", (Node("B", (Node("A", (Leaf(1),)),)),))
    t = ProtocolTree(1, chain)
    assert classical.potential_sequence(t, 1) == pytest.approx([1.0] * 4)
    assert classical.potential_sequence(t, 0) == pytest.approx([0.0] * 4)


def test_strikeout_four_bits_beats_trivial():
    rep = classical.cheat_report(classical.build_strikeout(4))
    assert rep.H_A > 2.0 and rep.H_B > 2.0
    assert rep.exact["shannon"] is False
