import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbsg import qcore
from qbsg.qcore import DensityMatrix, MeasurementOperatorSet, QuantumChannel, StateVector

thetas = st.floats(min_value=1e-3, max_value=math.pi / 2)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


@given(thetas)
def test_signal_overlap_and_swap(theta):
    pair = qcore.make_signal_pair(theta)
    overlap = abs(pair.psi0.inner(pair.psi1)) ** 2
    assert overlap == pytest.approx(math.cos(theta) ** 2, abs=1e-12)
    u = pair.swap_unitary
    assert np.allclose(u @ pair.psi0.amplitudes, pair.psi1.amplitudes)
    assert np.allclose(u @ pair.psi1.amplitudes, pair.psi0.amplitudes)
    assert np.allclose(u @ u.conj().T, np.eye(2))


@pytest.mark.parametrize("theta", [0.0, -0.1, math.pi / 2 + 0.01])
def test_signal_pair_rejects_out_of_range(theta):
    with pytest.raises(ValueError):
        qcore.make_signal_pair(theta)


def test_trace_distance_zero_plus():
    zero = StateVector.basis(0).density()
    plus = StateVector.normalized([1, 1]).density()
    assert qcore.trace_distance(zero, plus) == pytest.approx(0.7071067811865476, abs=1e-12)


def test_trace_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        qcore.trace_distance(DensityMatrix.maximally_mixed(2), DensityMatrix.maximally_mixed(4))


def test_fuchs_van_de_graaf_upper_bound_on_many_pairs():
    rng = np.random.default_rng(7)
    worst = -1.0
    for _ in range(10_000):
        rho = qcore.random_density_matrix(2, rng)
        psi = qcore.random_pure_state(2, rng)
        d = qcore.trace_distance(rho, psi.density())
        f = qcore.fidelity_pure(rho, psi)
        worst = max(worst, d - math.sqrt(max(1.0 - f, 0.0)))
    assert worst <= 1e-12


@given(seeds)
def test_trace_distance_is_a_metric_on_triples(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (qcore.random_density_matrix(3, rng) for _ in range(3))
    dab, dbc, dac = qcore.trace_distance(a, b), qcore.trace_distance(b, c), qcore.trace_distance(a, c)
    assert 0.0 <= dab <= 1.0 + 1e-12
    assert dab == pytest.approx(qcore.trace_distance(b, a), abs=1e-12)
    assert dac <= dab + dbc + 1e-12


@given(st.floats(min_value=0.5, max_value=1.0), seeds)
def test_depolarizing_fidelity_is_state_independent(f0, seed):
    ch = qcore.depolarizing_from_fidelity(f0)
    psi = qcore.random_pure_state(2, np.random.default_rng(seed))
    assert qcore.fidelity_pure(ch.apply(psi.density()), psi) == pytest.approx(f0, abs=1e-12)


def test_depolarizing_at_090():
    ch = qcore.depolarizing_from_fidelity(0.9)
    zero = StateVector.basis(0)
    out = ch.apply(zero.density())
    assert qcore.fidelity_pure(out, zero) == pytest.approx(0.9, abs=1e-12)
    # p = 0.2 leaves 1 - p/2 weight on the input
    assert np.allclose(out.entries, np.diag([0.9, 0.1]))


def test_depolarizing_identity_and_range():
    assert qcore.depolarizing_from_fidelity(1.0).is_identity
    with pytest.raises(ValueError):
        qcore.depolarizing_from_fidelity(0.4)


def test_channel_rejects_non_trace_preserving():
    with pytest.raises(ValueError):
        QuantumChannel((0.5 * np.eye(2),))


def test_apply_last_acts_on_second_factor():
    rng = np.random.default_rng(3)
    ra = qcore.random_density_matrix(2, rng)
    rb = qcore.random_density_matrix(2, rng)
    ch = qcore.depolarizing_from_fidelity(0.8)
    joint = qcore.tensor(ra, rb)
    out = ch.apply_last(joint.entries)
    assert np.allclose(out, np.kron(ra.entries, ch.apply(rb).entries))


def test_state_validation():
    with pytest.raises(ValueError):
        StateVector(np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([0.7, 0.7]))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.2, -0.2]))
    with pytest.raises(ValueError):
        DensityMatrix(np.array([[0.5, 0.5], [0.0, 0.5]]))
    with pytest.raises(ValueError):
        StateVector.basis(0, dim=qcore.MAX_DIM * 2)


def test_measurement_completeness_is_checked():
    with pytest.raises(ValueError):
        MeasurementOperatorSet((np.diag([1.0, 0.0]), np.diag([0.0, 0.5])))
    with pytest.raises(ValueError):
        MeasurementOperatorSet((np.diag([1.5, 0.0]), np.diag([-0.5, 1.0])))


@given(seeds)
def test_partial_trace_of_product(seed):
    rng = np.random.default_rng(seed)
    ra, rb = qcore.random_density_matrix(2, rng), qcore.random_density_matrix(3, rng)
    joint = qcore.tensor(ra, rb)
    assert np.allclose(qcore.partial_trace(joint, [2, 3], 1).entries, ra.entries)
    assert np.allclose(qcore.partial_trace(joint, [2, 3], 0).entries, rb.entries)
    assert qcore.partial_trace(joint.entries, [2, 3], [0, 1]).shape == (1, 1)


def test_partial_trace_rejects_bad_dims():
    with pytest.raises(ValueError):
        qcore.partial_trace(np.eye(4) / 4, [2, 3], 0)
    with pytest.raises(ValueError):
        qcore.partial_trace(np.eye(4) / 4, [2, 2], 2)


def test_born_sample_frequencies():
    rng = np.random.default_rng(11)
    theta = math.pi / 3
    pair = qcore.make_signal_pair(theta)
    m = MeasurementOperatorSet.projective(pair.psi0)
    rho = pair.psi1.density()
    p_pass = abs(pair.psi0.inner(pair.psi1)) ** 2
    trials = 40_000
    hits = sum(qcore.born_sample(rho, m, rng)[0] == 0 for _ in range(trials))
    sigma = math.sqrt(p_pass * (1 - p_pass) / trials)
    assert abs(hits / trials - p_pass) <= 4 * sigma


def test_born_sample_post_state_is_projected():
    rng = np.random.default_rng(0)
    m = MeasurementOperatorSet.basis([StateVector.basis(0), StateVector.basis(1)])
    k, post = qcore.born_sample(StateVector.normalized([1, 1]).density(), m, rng)
    assert np.allclose(post.entries, StateVector.basis(k).projector())


def test_born_sample_never_returns_zero_probability_outcome():
    rng = np.random.default_rng(5)
    m = MeasurementOperatorSet((np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), np.zeros((2, 2))))
    rho = StateVector.basis(1).density()
    assert {qcore.born_sample(rho, m, rng)[0] for _ in range(200)} == {1}


@given(seeds, st.integers(min_value=2, max_value=5))
def test_random_generators_are_valid(seed, dim):
    rng = np.random.default_rng(seed)
    u = qcore.random_unitary(dim, rng)
    assert np.allclose(u @ u.conj().T, np.eye(dim), atol=1e-10)
    m = qcore.random_two_outcome_measurement(dim, rng)
    rho = qcore.random_density_matrix(dim, rng)
    p = qcore.outcome_probabilities(rho, m)
    assert p.min() >= -1e-12 and p.sum() == pytest.approx(1.0)


def test_half_fidelity_channel_outputs_maximally_mixed():
    ch = qcore.depolarizing_from_fidelity(0.5)
    rng = np.random.default_rng(2)
    for _ in range(5):
        out = ch.apply(qcore.random_density_matrix(2, rng))
        assert np.allclose(out.entries, np.eye(2) / 2)


def test_born_sample_examples():
    rng = np.random.default_rng(4)
    z = MeasurementOperatorSet.basis([StateVector.basis(0), StateVector.basis(1)])
    zero = StateVector.basis(0).density()
    assert all(qcore.born_sample(zero, z, rng)[0] == 0 for _ in range(200))
    trials = 100_000
    mixed = DensityMatrix.maximally_mixed(2)
    ones = sum(qcore.born_sample(mixed, z, rng)[0] for _ in range(trials))
    assert abs(ones / trials - 0.5) <= 3 * math.sqrt(0.25 / trials)


@given(thetas)
def test_signal_projective_test_pass_probability(theta):
    pair = qcore.make_signal_pair(theta)
    m = MeasurementOperatorSet.projective(pair.psi1)
    p = qcore.outcome_probabilities(pair.psi0.density(), m)
    assert p[0] == pytest.approx(math.cos(theta) ** 2, abs=1e-12)


def test_signal_pair_examples():
    assert abs(qcore.make_signal_pair(math.pi / 2).psi0.inner(qcore.make_signal_pair(math.pi / 2).psi1)) < 1e-15
    pair = qcore.make_signal_pair(math.pi / 3)
    assert abs(pair.psi0.inner(pair.psi1)) ** 2 == pytest.approx(0.25, abs=1e-15)
