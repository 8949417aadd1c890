"""Round-by-round execution of the two-party bit-string protocol.

Each round: Alice prepares a joint state and sends its last qubit, Bob
announces b, Alice announces a, Bob tests the qubit against the signal for
a.  In the revealed variant Bob then announces the test outcome index
(0 = pass).  Outputs are x_i = a_i xor b_i; Bob aborts when the number of
passed tests falls short of n * f_star.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from . import qcore
from .qcore import DensityMatrix, MeasurementOperatorSet, QuantumChannel
from .strategies import ABANDON

PROTOCOL1 = "Protocol1"
PROTOCOL2 = "Protocol2"
VARIANTS = (PROTOCOL1, PROTOCOL2)
TRANSCRIPT_HEADER = ("index", "a", "b", "f", "revealed_outcome")


@dataclass(frozen=True, eq=False)
class ProtocolParams:
    n: int
    theta: float
    f_star: float = 1.0
    variant: str = PROTOCOL1
    channel: QuantumChannel = field(default_factory=QuantumChannel.identity)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not (0.0 < self.f_star <= 1.0):
            raise ValueError(f"f_star must lie in (0, 1], got {self.f_star!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.channel.dim != 2:
            raise ValueError("channel must act on a qubit")
        qcore.make_signal_pair(self.theta)

    @property
    def reveals(self) -> bool:
        return self.variant == PROTOCOL2


@dataclass(frozen=True)
class RoundRecord:
    a: int
    b: int
    f: int | None
    revealed_outcome: int | None = None

    @property
    def x(self) -> int:
        return self.a ^ self.b


@dataclass(frozen=True)
class Transcript:
    rounds: tuple
    n: int
    f_star: float
    variant: str = PROTOCOL1
    abandoned_by: str | None = None

    @property
    def complete(self) -> bool:
        return self.abandoned_by is None and len(self.rounds) == self.n

    @property
    def passes(self) -> int:
        return sum(r.f for r in self.rounds)

    @property
    def pass_flag(self) -> bool:
        return self.complete and fidelity_test(self, self.f_star)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRANSCRIPT_HEADER)
        for i, r in enumerate(self.rounds):
            w.writerow((i, r.a, r.b, r.f, "" if r.revealed_outcome is None else r.revealed_outcome))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, n: int, f_star: float, variant: str = PROTOCOL1) -> "Transcript":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != TRANSCRIPT_HEADER:
            raise ValueError(f"transcript header must be {','.join(TRANSCRIPT_HEADER)}")
        rounds = []
        for k, row in enumerate(rows[1:]):
            if int(row[0]) != k:
                raise ValueError(f"round index {row[0]} out of order at line {k + 2}")
            rev = int(row[4]) if row[4] != "" else None
            rounds.append(RoundRecord(int(row[1]), int(row[2]), int(row[3]), rev))
        abandoned = None if len(rounds) == n else "unknown"
        return cls(tuple(rounds), n, f_star, variant, abandoned)


@dataclass(frozen=True)
class ProtocolOutcome:
    """Each output is a tuple of n bits, or None for ABORT."""

    n: int
    x: tuple | None
    y: tuple | None

    @property
    def aborted(self) -> bool:
        return self.x is None or self.y is None


def fidelity_test(transcript: Transcript, f_star: float) -> bool:
    """Inclusive test: pass iff the number of passed rounds is at least n * f_star."""
    # tolerance absorbs rounding in n * f_star
    return transcript.passes >= transcript.n * f_star - 1e-9 * transcript.n


class _JointState:
    """Alice's kept system (factor 0) and the transmitted qubit (factor 1)."""

    def __init__(self, rho: np.ndarray, dim_a: int, rng: np.random.Generator):
        self.rho = rho
        self.dims = (dim_a, 2)
        self.rng = rng

    def measure(self, factor: int, m: MeasurementOperatorSet) -> int:
        da, db = self.dims
        if factor == 0:
            lifted = MeasurementOperatorSet(tuple(np.kron(e, np.eye(db)) for e in m.elements))
        else:
            lifted = MeasurementOperatorSet(tuple(np.kron(np.eye(da), e) for e in m.elements))
        k, post = qcore.born_sample(self.rho, lifted, self.rng)
        self.rho = post.entries
        return k

    def reduced(self, factor: int) -> DensityMatrix:
        return DensityMatrix.from_unnormalized(qcore.partial_trace(self.rho, list(self.dims), 1 - factor))


class _Handle:
    def __init__(self, joint: _JointState, factor: int):
        self._joint = joint
        self._factor = factor

    def measure(self, m: MeasurementOperatorSet) -> int:
        return self._joint.measure(self._factor, m)

    def state(self) -> DensityMatrix:
        return self._joint.reduced(self._factor)


def _streams(seed: int) -> tuple[np.random.Generator, ...]:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1))
    return tuple(np.random.Generator(np.random.Philox(s)) for s in ss.spawn(3))


def run_protocol(params: ProtocolParams, alice, bob, seed: int) -> tuple[ProtocolOutcome, Transcript]:
    """Execute one run; deterministic in ``seed``.

    The noisy channel carries the signal unless either party's strategy
    replaces it with a perfect one.
    """
    rng_alice, rng_bob, rng_nature = _streams(seed)
    a_sess = alice.start(rng_alice)
    b_sess = bob.start(rng_bob)
    bypass = alice.replaces_channel or bob.replaces_channel
    channel = None if bypass or params.channel.is_identity else params.channel
    records: list[RoundRecord] = []
    alice_view: list[RoundRecord] = []
    abandoned = None
    for i in range(params.n):
        prep = a_sess.prepare(i, tuple(alice_view))
        if prep is ABANDON:
            abandoned = "alice"
            break
        rho = prep.rho.entries
        if rho.shape[0] != 2 * prep.dim_a:
            raise ValueError(f"round {i}: prepared state of dimension {rho.shape[0]} does not "
                             f"end in a transmitted qubit")
        if channel is not None:
            rho = channel.apply_last(rho)
        joint = _JointState(rho, prep.dim_a, rng_nature)
        system_a, system_b = _Handle(joint, 0), _Handle(joint, 1)
        b = b_sess.receive(i, system_b, tuple(records))
        if b is ABANDON:
            abandoned = "bob"
            break
        a = a_sess.declare(i, b, tuple(alice_view), system_a)
        if a is ABANDON:
            abandoned = "alice"
            break
        f, outcome = b_sess.test(i, a, system_b)
        rec = RoundRecord(int(a), int(b), int(f), int(outcome) if params.reveals else None)
        records.append(rec)
        seen = rec if params.reveals else replace(rec, f=None)
        alice_view.append(seen)
        a_sess.observe(seen)
    transcript = Transcript(tuple(records), params.n, params.f_star, params.variant, abandoned)
    if abandoned is not None:
        return ProtocolOutcome(params.n, None, None), transcript
    x = tuple(r.x for r in records)
    y = x if transcript.pass_flag else None
    return ProtocolOutcome(params.n, x, y), transcript


def _replacement_bits(seed: int, n: int, party: int) -> tuple:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(0xAB0, party))
    rng = np.random.Generator(np.random.Philox(ss))
    return tuple(int(v) for v in rng.integers(0, 2, size=n))


def never_abort_output(outcome: ProtocolOutcome, seed: int) -> tuple[tuple, tuple]:
    """Replace each ABORT by an independent uniform string drawn from ``seed``."""
    x = outcome.x if outcome.x is not None else _replacement_bits(seed, outcome.n, 0)
    y = outcome.y if outcome.y is not None else _replacement_bits(seed, outcome.n, 1)
    return x, y


def bits_to_code(bits: Iterable[int]) -> int:
    code = 0
    for v in bits:
        code = (code << 1) | int(v)
    return code
