"""Honest and adversarial strategies, and exact single-round cheating analysis.

Joint states are ordered A (Alice's kept system) then B (the transmitted
qubit).  A two-outcome Alice measurement ``m_b`` is applied after Bob
announces ``b``; element ``m_b[a]`` means "declare a".

Multi-round strategies are immutable; ``start(rng)`` returns a session that
holds the per-run state, so one strategy object can drive parallel runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import qcore
from .bounds import bias_cap
from .qcore import DensityMatrix, MeasurementOperatorSet, QuantumChannel, SignalPair, StateVector

ABANDON = type("Abandon", (), {"__repr__": lambda self: "ABANDON"})()

_ZERO2 = np.zeros((2, 2), dtype=complex)


def _proj(i: int, d: int = 2) -> np.ndarray:
    return StateVector.basis(i, d).projector()


# -- single-round Alice strategies --------------------------------------------

@dataclass(frozen=True, eq=False)
class SingleRoundAliceStrategy:
    rho_ab: DensityMatrix
    m0: MeasurementOperatorSet
    m1: MeasurementOperatorSet
    target: int = 0
    name: str = "custom"

    def __post_init__(self):
        if not isinstance(self.rho_ab, DensityMatrix):
            object.__setattr__(self, "rho_ab", DensityMatrix(np.asarray(self.rho_ab, dtype=complex)))
        d = self.rho_ab.dim
        if d % 2:
            raise ValueError(f"joint state dimension {d} has no qubit factor for Bob")
        da = d // 2
        for m in (self.m0, self.m1):
            if len(m) != 2:
                raise ValueError("Alice's measurements must have exactly two outcomes")
            if m.dim != da:
                raise ValueError(f"measurement acts on dimension {m.dim}, Alice's system has {da}")
        if self.target not in (0, 1):
            raise ValueError(f"target must be a bit, got {self.target!r}")

    @property
    def dim_a(self) -> int:
        return self.rho_ab.dim // 2

    def measurement(self, b: int) -> MeasurementOperatorSet:
        return self.m1 if b else self.m0

    def element(self, b: int, a: int) -> np.ndarray:
        return self.measurement(b)[a]


@dataclass(frozen=True)
class SingleRoundAnalysis:
    E_f: float
    E_q: float
    cap: float

    @property
    def within_cap(self) -> bool:
        return self.E_q <= self.cap + 1e-9


@dataclass(frozen=True)
class ConditionalStates:
    """Bob's reduced states conditioned on Alice's four measurement outcomes.

    ``sigma``/``sigma_bar`` follow outcomes 0/1 of the b=0 measurement,
    ``tau``/``tau_bar`` outcomes 1/0 of the b=1 measurement; each is
    normalised (zero matrix for an impossible outcome).  ``rho0``/``rho1``
    are the unnormalised states accompanying a declared 0/1.
    """

    q: float
    q_prime: float
    sigma: np.ndarray
    sigma_bar: np.ndarray
    tau: np.ndarray
    tau_bar: np.ndarray
    rho0: np.ndarray
    rho1: np.ndarray
    rho_b: np.ndarray


def _bob_part(s: SingleRoundAliceStrategy, e: np.ndarray, rho: np.ndarray | None = None) -> np.ndarray:
    r = s.rho_ab.entries if rho is None else rho
    return qcore.partial_trace(np.kron(e, np.eye(2)) @ r, [s.dim_a, 2], 0)


def conditional_states(s: SingleRoundAliceStrategy) -> ConditionalStates:
    un = {(b, a): _bob_part(s, s.element(b, a)) for b in (0, 1) for a in (0, 1)}
    q = float(np.trace(un[0, 0]).real)
    qp = float(np.trace(un[1, 1]).real)

    def norm(x, p):
        return x / p if p > 0 else _ZERO2.copy()

    return ConditionalStates(
        q=q, q_prime=qp,
        sigma=norm(un[0, 0], q), sigma_bar=norm(un[0, 1], 1.0 - q),
        tau=norm(un[1, 1], qp), tau_bar=norm(un[1, 0], 1.0 - qp),
        rho0=un[0, 0] + un[1, 0], rho1=un[1, 1] + un[0, 1],
        rho_b=qcore.partial_trace(s.rho_ab.entries, [s.dim_a, 2], 0),
    )


def _delivered(s: SingleRoundAliceStrategy, channel: QuantumChannel | None) -> np.ndarray:
    r = s.rho_ab.entries
    if channel is None or channel.is_identity:
        return r
    return channel.apply_last(r)


def analyze_single_round(s: SingleRoundAliceStrategy, theta: float,
                         channel: QuantumChannel | None = None) -> SingleRoundAnalysis:
    pair = qcore.make_signal_pair(theta)
    rho = _delivered(s, channel)
    r0 = _bob_part(s, s.element(0, 0), rho) + _bob_part(s, s.element(1, 0), rho)
    r1 = _bob_part(s, s.element(1, 1), rho) + _bob_part(s, s.element(0, 1), rho)
    e_f = 0.5 * (qcore.fidelity_pure(r0, pair.psi0) + qcore.fidelity_pure(r1, pair.psi1))
    c = s.target
    e_q = 0.5 * sum(
        float(np.trace(np.kron(s.element(b, b ^ c), np.eye(2)) @ s.rho_ab.entries).real) for b in (0, 1)
    )
    return SingleRoundAnalysis(e_f, e_q, bias_cap(min(max(e_f, 0.0), 1.0), theta))


def honest_single_round(theta: float, target: int = 0) -> SingleRoundAliceStrategy:
    """Random a recorded in a classical register, matching signal sent, register read out."""
    pair = qcore.make_signal_pair(theta)
    rho = 0.5 * sum(np.kron(_proj(a), pair[a].projector()) for a in (0, 1))
    z = MeasurementOperatorSet((_proj(0), _proj(1)))
    return SingleRoundAliceStrategy(DensityMatrix(rho), z, z, target, "honest")


def _declare_xor(target: int) -> tuple[MeasurementOperatorSet, MeasurementOperatorSet]:
    one = np.eye(1, dtype=complex)
    zero = np.zeros((1, 1), dtype=complex)
    ms = []
    for b in (0, 1):
        want = b ^ target
        ms.append(MeasurementOperatorSet((one, zero) if want == 0 else (zero, one)))
    return ms[0], ms[1]


def always_agree(theta: float, target: int = 0) -> SingleRoundAliceStrategy:
    """Send psi_0 and declare a = b xor target."""
    pair = qcore.make_signal_pair(theta)
    m0, m1 = _declare_xor(target)
    return SingleRoundAliceStrategy(DensityMatrix(pair.psi0.projector()), m0, m1, target, "always_agree")


def midpoint(theta: float, target: int = 0) -> SingleRoundAliceStrategy:
    """Send the normalised bisector of psi_0 and psi_1 and declare a = b xor target."""
    qcore.make_signal_pair(theta)
    m0, m1 = _declare_xor(target)
    return SingleRoundAliceStrategy(DensityMatrix(_proj(0)), m0, m1, target, "midpoint")


def _lift_to_qubit(s: SingleRoundAliceStrategy) -> SingleRoundAliceStrategy:
    """Embed a trivial (dimension-1) Alice system into a qubit."""
    if s.dim_a != 1:
        return s
    rho = np.kron(_proj(0), s.rho_ab.entries)
    ms = [MeasurementOperatorSet(tuple(m[a][0, 0].real * np.eye(2) for a in (0, 1))) for m in (s.m0, s.m1)]
    return SingleRoundAliceStrategy(DensityMatrix(rho), ms[0], ms[1], s.target, s.name)


def symmetrize(s: SingleRoundAliceStrategy) -> SingleRoundAliceStrategy:
    """Mix the strategy with its U_B-conjugated mirror using a control qubit.

    Output ordering is control, A, B.  The mirror branch swaps the roles of
    the two measurements so the target is unchanged.
    """
    s = _lift_to_qubit(s)
    if s.rho_ab.dim != 4:
        raise ValueError(f"symmetrize expects a two-qubit strategy, got dimension {s.rho_ab.dim}")
    u = np.kron(np.eye(2), qcore.SIGNAL_SWAP)
    rho = s.rho_ab.entries
    mirrored = u @ rho @ u.conj().T
    new_rho = 0.5 * (np.kron(_proj(0), rho) + np.kron(_proj(1), mirrored))
    p0, p1 = _proj(0), _proj(1)
    m00, m01 = s.m0[0], s.m0[1]
    m10, m11 = s.m1[0], s.m1[1]
    new_m0 = MeasurementOperatorSet((np.kron(p0, m00) + np.kron(p1, m11), np.kron(p0, m01) + np.kron(p1, m10)))
    new_m1 = MeasurementOperatorSet((np.kron(p0, m10) + np.kron(p1, m01), np.kron(p0, m11) + np.kron(p1, m00)))
    return SingleRoundAliceStrategy(DensityMatrix(new_rho), new_m0, new_m1, s.target, f"sym({s.name})")


def retarget(s: SingleRoundAliceStrategy, target: int) -> SingleRoundAliceStrategy:
    """Same attack aimed at the other output bit: U_B on the signal, declarations flipped."""
    if target == s.target:
        return s
    u = np.kron(np.eye(s.dim_a), qcore.SIGNAL_SWAP)
    rho = u @ s.rho_ab.entries @ u.conj().T
    m0 = MeasurementOperatorSet((s.m0[1], s.m0[0]))
    m1 = MeasurementOperatorSet((s.m1[1], s.m1[0]))
    return SingleRoundAliceStrategy(DensityMatrix(rho), m0, m1, target, s.name)


def random_single_round_strategy(seed: int, dim_a: int = 2, target: int = 0) -> SingleRoundAliceStrategy:
    rng = np.random.default_rng(seed)
    rho = qcore.random_density_matrix(2 * dim_a, rng)
    m0 = qcore.random_two_outcome_measurement(dim_a, rng)
    m1 = qcore.random_two_outcome_measurement(dim_a, rng)
    return SingleRoundAliceStrategy(rho, m0, m1, target, f"random[{seed}]")


# -- exact per-round outcome tables -------------------------------------------

def round_cells_vs_honest_bob(s: SingleRoundAliceStrategy, theta: float,
                              channel: QuantumChannel | None = None) -> np.ndarray:
    """P(2f + q) for one round against honest Bob; q = [a xor b = target]."""
    pair = qcore.make_signal_pair(theta)
    rho = _delivered(s, channel)
    cells = np.zeros(4)
    for b in (0, 1):
        for a in (0, 1):
            q = int((a ^ b) == s.target)
            p_pass = float(np.trace(np.kron(s.element(b, a), pair[a].projector()) @ rho).real)
            p_all = float(np.trace(np.kron(s.element(b, a), np.eye(2)) @ rho).real)
            cells[2 + q] += 0.5 * p_pass
            cells[q] += 0.5 * (p_all - p_pass)
    return np.clip(cells, 0.0, None)


def round_cells_vs_measuring_bob(s: SingleRoundAliceStrategy, guess: MeasurementOperatorSet,
                                 channel: QuantumChannel | None = None) -> np.ndarray:
    """P(2f + q) against a Bob who guesses a on arrival and sets b = guess xor target.

    Such a Bob reports every test as passed, so only cells with f = 1 occur.
    """
    rho = _delivered(s, channel)
    cells = np.zeros(4)
    for g in (0, 1):
        b = g ^ s.target
        for a in (0, 1):
            p = float(np.trace(np.kron(s.element(b, a), guess[g]) @ rho).real)
            cells[2 + int(a == g)] += p
    return np.clip(cells, 0.0, None)


def cumulative_cells(cells: np.ndarray) -> np.ndarray:
    c = np.cumsum(cells / cells.sum())
    last = int(np.flatnonzero(cells > 0)[-1])
    c[last:] = 1.0
    return c


# -- Bob's measurement ------------------------------------------------------------

def helstrom_success(theta: float) -> float:
    """Optimal probability of identifying which signal state was sent."""
    if not (0.0 <= theta <= math.pi / 2 + 1e-15):
        raise ValueError(f"theta must lie in [0, pi/2], got {theta!r}")
    return 0.5 * (1.0 + math.sin(theta))


def helstrom_measurement(pair: SignalPair) -> MeasurementOperatorSet:
    """Eigenbasis of psi0 psi0^dagger - psi1 psi1^dagger; outcome g means guess a = g."""
    diff = pair.psi0.projector() - pair.psi1.projector()
    w, v = np.linalg.eigh(diff)
    plus, minus = v[:, 1], v[:, 0]
    return MeasurementOperatorSet((np.outer(plus, plus.conj()), np.outer(minus, minus.conj())))


def guess_success(guess: MeasurementOperatorSet, pair: SignalPair) -> float:
    return 0.5 * sum(float(np.trace(guess[a] @ pair[a].projector()).real) for a in (0, 1))


# -- multi-round policies ------------------------------------------------------------

def _bits(target, n: int) -> np.ndarray:
    """Target bits for n rounds; a single bit is repeated."""
    if isinstance(target, str):
        if not target or set(target) - {"0", "1"}:
            raise ValueError(f"target must be a bit string, got {target!r}")
        target = [int(ch) for ch in target]
    arr = np.asarray(target, dtype=np.int64).reshape(-1)
    if np.any((arr != 0) & (arr != 1)):
        raise ValueError("target entries must be bits")
    arr = arr.astype(np.uint8)
    if arr.size == 1:
        return np.full(n, arr[0], dtype=np.uint8)
    if arr.size != n:
        raise ValueError(f"target must have {n} bits, got {arr.size}")
    return arr


@dataclass(frozen=True, eq=False)
class TablePolicy:
    """Round strategy chosen from a menu by (round, tests passed so far).

    ``choice[i, s]`` indexes ``menu``; each menu entry is aimed at bit
    ``targets[i]`` of the target string.  A table whose rows are constant
    never looks at revealed test results.
    """

    menu: tuple
    choice: np.ndarray
    targets: np.ndarray
    name: str = "table"

    def __post_init__(self):
        ch = np.ascontiguousarray(self.choice, dtype=np.int32)
        n = ch.shape[0]
        if ch.shape != (n, n + 1):
            raise ValueError(f"choice table must have shape (n, n+1), got {ch.shape}")
        if ch.min() < 0 or ch.max() >= len(self.menu):
            raise ValueError("choice table refers to a missing menu strategy")
        object.__setattr__(self, "choice", ch)
        object.__setattr__(self, "targets", _bits(self.targets, n))
        retargeted = tuple(tuple(retarget(m, t) for t in (0, 1)) for m in self.menu)
        object.__setattr__(self, "_retargeted", retargeted)

    @property
    def n(self) -> int:
        return self.choice.shape[0]

    @property
    def adaptive(self) -> bool:
        return bool(np.any(self.choice != self.choice[:, :1]))

    def __call__(self, past) -> SingleRoundAliceStrategy:
        i = len(past)
        if i >= self.n:
            raise ValueError(f"policy defined for {self.n} rounds, asked for round {i}")
        if self.adaptive:
            if any(r.f is None for r in past):
                raise ValueError("adaptive policy needs revealed test results")
            s = sum(r.f for r in past)
        else:
            s = 0
        return self._retargeted[int(self.choice[i, s])][int(self.targets[i])]

    @classmethod
    def constant(cls, strategy: SingleRoundAliceStrategy, n: int, target=0, name=None) -> "TablePolicy":
        return cls((strategy,), np.zeros((n, n + 1), dtype=np.int32), _bits(target, n), name or strategy.name)

    @classmethod
    def threshold(cls, honest: SingleRoundAliceStrategy, cheat: SingleRoundAliceStrategy, n: int,
                  f_star: float, target=0) -> "TablePolicy":
        """Cheat while the running pass count keeps pace with f*, play honest otherwise."""
        i = np.arange(n)[:, None]
        s = np.arange(n + 1)[None, :]
        choice = (s >= f_star * i).astype(np.int32)
        return cls((honest, cheat), choice, _bits(target, n), "threshold")

    @classmethod
    def parity_mix(cls, honest: SingleRoundAliceStrategy, first: SingleRoundAliceStrategy,
                   second: SingleRoundAliceStrategy, n: int, target=0) -> "TablePolicy":
        """Alternate between two attacks on the parity of passed tests, honest on every third round."""
        i = np.arange(n)[:, None]
        s = np.arange(n + 1)[None, :]
        choice = np.where(i % 3 == 2, 0, 1 + (s % 2)).astype(np.int32)
        return cls((honest, first, second), choice, _bits(target, n), "parity_mix")


@dataclass(frozen=True, eq=False)
class ConstantPolicy:
    """The same single-round strategy every round, whatever the past."""

    strategy: SingleRoundAliceStrategy

    @property
    def name(self) -> str:
        return self.strategy.name

    def __call__(self, past) -> SingleRoundAliceStrategy:
        return self.strategy


def as_table(policy, n: int) -> TablePolicy | None:
    """Tabulated form of a policy over n rounds, or None if it has none."""
    if isinstance(policy, TablePolicy):
        return policy if policy.n == n else None
    if isinstance(policy, ConstantPolicy):
        return TablePolicy.constant(policy.strategy, n, policy.strategy.target)
    return None


@dataclass(frozen=True)
class RoundPreparation:
    rho: DensityMatrix
    dim_a: int


class PolicyAlice:
    """Alice playing a single-round strategy per round, chosen from her view of the past."""

    def __init__(self, policy: Callable, replaces_channel: bool, name: str, theta: float):
        self.policy = policy
        self.replaces_channel = replaces_channel
        self.name = name
        self.theta = theta

    def start(self, rng: np.random.Generator) -> "_PolicyAliceSession":
        return _PolicyAliceSession(self)

    def __repr__(self):
        return f"PolicyAlice({self.name!r})"


class _PolicyAliceSession:
    def __init__(self, strategy: PolicyAlice):
        self.strategy = strategy
        self.current: SingleRoundAliceStrategy | None = None

    def prepare(self, i: int, view):
        s = self.strategy.policy(view)
        if s is ABANDON:
            return ABANDON
        self.current = s
        return RoundPreparation(s.rho_ab, s.dim_a)

    def declare(self, i: int, b: int, view, system_a):
        return system_a.measure(self.current.measurement(b))

    def observe(self, record) -> None:
        pass


def honest_alice(theta: float) -> PolicyAlice:
    return PolicyAlice(ConstantPolicy(honest_single_round(theta)), False, "honest", theta)


def adaptive_alice_protocol2(policy: Callable, theta: float, fallback: SingleRoundAliceStrategy | None = None,
                             name: str | None = None) -> PolicyAlice:
    """Cheating Alice for the revealed-outcome variant; bypasses the noisy channel."""
    if fallback is None:
        fn = policy
    else:
        def fn(view):
            try:
                s = policy(view)
            except (KeyError, IndexError):
                return fallback
            return fallback if s is None else s
    return PolicyAlice(fn, True, name or getattr(policy, "name", "adaptive"), theta)


class HonestBob:
    replaces_channel = False
    name = "honest"

    def __init__(self, theta: float):
        self.theta = theta
        self.pair = qcore.make_signal_pair(theta)
        self.tests = tuple(MeasurementOperatorSet.projective(self.pair[a]) for a in (0, 1))

    def start(self, rng: np.random.Generator) -> "_HonestBobSession":
        return _HonestBobSession(self, rng)


class _HonestBobSession:
    def __init__(self, strategy: HonestBob, rng):
        self.strategy = strategy
        self.rng = rng

    def receive(self, i: int, system_b, view) -> int:
        return int(self.rng.integers(2))

    def test(self, i: int, a: int, system_b) -> tuple[int, int]:
        outcome = system_b.measure(self.strategy.tests[a])
        return int(outcome == 0), outcome


class MeasuringBob:
    """Bob measuring each signal on arrival and choosing b = guess xor target bit."""

    replaces_channel = True

    def __init__(self, guess: MeasurementOperatorSet, target, n: int, name: str = "measuring"):
        if len(guess) != 2 or guess.dim != 2:
            raise ValueError("guess measurement must be a two-outcome qubit measurement")
        self.guess = guess
        self.targets = _bits(target, n)
        self.name = name

    def start(self, rng: np.random.Generator) -> "_MeasuringBobSession":
        return _MeasuringBobSession(self)


class _MeasuringBobSession:
    def __init__(self, strategy: MeasuringBob):
        self.strategy = strategy

    def receive(self, i: int, system_b, view) -> int:
        g = system_b.measure(self.strategy.guess)
        return g ^ int(self.strategy.targets[i])

    def test(self, i: int, a: int, system_b) -> tuple[int, int]:
        return 1, 0


def honest_bob(theta: float) -> HonestBob:
    return HonestBob(theta)


def helstrom_bob(theta: float, target, n: int) -> MeasuringBob:
    return MeasuringBob(helstrom_measurement(qcore.make_signal_pair(theta)), target, n, "helstrom")


class AbandoningAlice:
    """Wrapper that walks away before preparing round ``at_round``."""

    def __init__(self, inner, at_round: int):
        self.inner = inner
        self.at_round = at_round
        self.replaces_channel = inner.replaces_channel
        self.name = f"{inner.name}+abandon@{at_round}"

    def start(self, rng):
        inner = self.inner.start(rng)
        at = self.at_round

        class _Session:
            def prepare(self, i, view):
                return ABANDON if i >= at else inner.prepare(i, view)

            def declare(self, i, b, view, system_a):
                return inner.declare(i, b, view, system_a)

            def observe(self, record):
                inner.observe(record)

        return _Session()


class AbandoningBob:
    """Wrapper that walks away instead of announcing b in round ``at_round``."""

    def __init__(self, inner, at_round: int):
        self.inner = inner
        self.at_round = at_round
        self.replaces_channel = inner.replaces_channel
        self.name = f"{inner.name}+abandon@{at_round}"

    def start(self, rng):
        inner = self.inner.start(rng)
        at = self.at_round

        class _Session:
            def receive(self, i, system_b, view):
                return ABANDON if i >= at else inner.receive(i, system_b, view)

            def test(self, i, a, system_b):
                return inner.test(i, a, system_b)

        return _Session()


# -- registry ------------------------------------------------------------------

ALICE_NAMES = ("honest", "always_agree", "midpoint", "threshold", "parity_mix")
BOB_NAMES = ("honest", "helstrom")


def make_alice(name: str, theta: float, n: int, f_star: float = 1.0, target="0") -> PolicyAlice:
    tgt = _bits(target, n)
    if name == "honest":
        return honest_alice(theta)
    honest = honest_single_round(theta)
    if name in ("always_agree", "midpoint"):
        base = always_agree(theta) if name == "always_agree" else midpoint(theta)
        return adaptive_alice_protocol2(TablePolicy.constant(base, n, tgt), theta)
    if name == "threshold":
        return adaptive_alice_protocol2(TablePolicy.threshold(honest, always_agree(theta), n, f_star, tgt), theta)
    if name == "parity_mix":
        return adaptive_alice_protocol2(
            TablePolicy.parity_mix(honest, always_agree(theta), midpoint(theta), n, tgt), theta)
    raise ValueError(f"unknown Alice strategy {name!r}; choose from {ALICE_NAMES}")


def make_bob(name: str, theta: float, n: int, target="0"):
    if name == "honest":
        return honest_bob(theta)
    if name == "helstrom":
        return helstrom_bob(theta, _bits(target, n), n)
    raise ValueError(f"unknown Bob strategy {name!r}; choose from {BOB_NAMES}")
