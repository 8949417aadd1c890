"""Dense linear algebra for small quantum systems.

Everything here works on plain complex numpy arrays of dimension at most
16.  The thin value classes (:class:`StateVector`, :class:`DensityMatrix`,
:class:`MeasurementOperatorSet`, :class:`QuantumChannel`) validate their
invariants once at construction and are immutable afterwards; the
protocol simulator passes them between threads freely.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

MAX_DIM = 16
VALID_TOL = 1e-10
IDENTITY_TOL = 1e-9

# Unitary exchanging the two signal states in the real embedding used below.
SIGNAL_SWAP = np.diag([1.0, -1.0]).astype(complex)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _check_dim(d: int) -> None:
    if d < 1 or d > MAX_DIM:
        raise ValueError(f"dimension {d} outside supported range 1..{MAX_DIM}")


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        _check_dim(a.size)
        norm2 = float(np.vdot(a, a).real)
        if abs(norm2 - 1.0) > VALID_TOL:
            raise ValueError(f"state vector not normalised (|psi|^2 = {norm2!r})")
        object.__setattr__(self, "amplitudes", _frozen(a))

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        a = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(a / np.linalg.norm(a))

    @classmethod
    def basis(cls, index: int, dim: int = 2) -> "StateVector":
        a = np.zeros(dim, dtype=complex)
        a[index] = 1.0
        return cls(a)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.projector())

    def inner(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {rho.shape}")
        _check_dim(rho.shape[0])
        if np.max(np.abs(rho - rho.conj().T)) > VALID_TOL:
            raise ValueError("density matrix is not Hermitian")
        tr = complex(np.trace(rho))
        if abs(tr - 1.0) > VALID_TOL:
            raise ValueError(f"density matrix trace {tr!r} != 1")
        lam_min = float(np.linalg.eigvalsh(rho).min())
        if lam_min < -VALID_TOL:
            raise ValueError(f"density matrix not positive semidefinite (min eigenvalue {lam_min:.3g})")
        object.__setattr__(self, "entries", _frozen(rho))

    @classmethod
    def from_unnormalized(cls, a) -> "DensityMatrix":
        a = np.asarray(a, dtype=complex)
        a = 0.5 * (a + a.conj().T)
        return cls(a / np.trace(a).real)

    @classmethod
    def maximally_mixed(cls, dim: int = 2) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class MeasurementOperatorSet:
    """POVM elements indexed by outcome."""

    elements: tuple

    def __post_init__(self):
        els = tuple(_frozen(e) for e in self.elements)
        if not els:
            raise ValueError("measurement needs at least one element")
        d = els[0].shape[0]
        _check_dim(d)
        for e in els:
            if e.shape != (d, d):
                raise ValueError("measurement elements must share one square shape")
            if np.max(np.abs(e - e.conj().T)) > VALID_TOL:
                raise ValueError("measurement element is not Hermitian")
            if np.linalg.eigvalsh(e).min() < -VALID_TOL:
                raise ValueError("measurement element is not positive semidefinite")
        if np.max(np.abs(sum(els) - np.eye(d))) > VALID_TOL:
            raise ValueError("measurement elements do not sum to the identity")
        object.__setattr__(self, "elements", els)

    @classmethod
    def projective(cls, psi: StateVector) -> "MeasurementOperatorSet":
        """Two-outcome test {|psi><psi|, I - |psi><psi|}; outcome 0 means pass."""
        p = psi.projector()
        return cls((p, np.eye(psi.dim) - p))

    @classmethod
    def basis(cls, vectors: Sequence[StateVector]) -> "MeasurementOperatorSet":
        return cls(tuple(v.projector() for v in vectors))

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, k: int) -> np.ndarray:
        return self.elements[k]


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    kraus_operators: tuple

    def __post_init__(self):
        ks = tuple(_frozen(k) for k in self.kraus_operators)
        if not ks:
            raise ValueError("channel needs at least one Kraus operator")
        d = ks[0].shape[1]
        completeness = sum(k.conj().T @ k for k in ks)
        if np.max(np.abs(completeness - np.eye(d))) > VALID_TOL:
            raise ValueError("Kraus operators are not trace preserving")
        object.__setattr__(self, "kraus_operators", ks)

    @classmethod
    def identity(cls, dim: int = 2) -> "QuantumChannel":
        return cls((np.eye(dim),))

    @property
    def dim(self) -> int:
        return self.kraus_operators[0].shape[1]

    @property
    def is_identity(self) -> bool:
        return len(self.kraus_operators) == 1 and np.allclose(
            self.kraus_operators[0], np.eye(self.dim), atol=VALID_TOL
        )

    def apply_matrix(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.kraus_operators)

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        return DensityMatrix.from_unnormalized(self.apply_matrix(rho.entries))

    def apply_last(self, rho: np.ndarray) -> np.ndarray:
        """Act on the last tensor factor of a joint matrix."""
        d = self.dim
        front = rho.shape[0] // d
        eye = np.eye(front)
        return sum(
            np.kron(eye, k) @ rho @ np.kron(eye, k).conj().T for k in self.kraus_operators
        )


@dataclass(frozen=True, eq=False)
class SignalPair:
    theta: float
    psi0: StateVector
    psi1: StateVector
    swap_unitary: np.ndarray

    def states(self) -> tuple[StateVector, StateVector]:
        return self.psi0, self.psi1

    def __getitem__(self, a: int) -> StateVector:
        return (self.psi0, self.psi1)[a]


def make_signal_pair(theta: float) -> SignalPair:
    """Qubit states with |<psi0|psi1>|^2 = cos^2(theta), swapped by diag(1, -1)."""
    if not (0.0 < theta <= math.pi / 2 + 1e-15):
        raise ValueError(f"theta must lie in (0, pi/2], got {theta!r}")
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    psi0 = StateVector(np.array([c, s], dtype=complex))
    psi1 = StateVector(np.array([c, -s], dtype=complex))
    return SignalPair(theta, psi0, psi1, _frozen(SIGNAL_SWAP))


def _matrix(x) -> np.ndarray:
    if isinstance(x, DensityMatrix):
        return x.entries
    if isinstance(x, StateVector):
        return x.amplitudes
    return np.asarray(x, dtype=complex)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    ma, mb = _matrix(a), _matrix(b)
    if ma.shape != mb.shape:
        raise ValueError(f"dimension mismatch: {ma.shape} vs {mb.shape}")
    # difference is Hermitian, so singular values are |eigenvalues|
    return float(0.5 * np.abs(np.linalg.eigvalsh(ma - mb)).sum())


def fidelity_pure(rho: DensityMatrix, psi: StateVector) -> float:
    m, v = _matrix(rho), _matrix(psi)
    if m.shape[0] != v.size:
        raise ValueError(f"dimension mismatch: {m.shape[0]} vs {v.size}")
    return float(np.vdot(v, m @ v).real)


_PAULIS = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def depolarizing_from_fidelity(f0: float) -> QuantumChannel:
    """Qubit depolarising channel whose pure-state fidelity equals ``f0``.

    rho -> (1 - p) rho + p I/2 with p = 2 (1 - f0).
    """
    if not (0.5 <= f0 <= 1.0):
        raise ValueError(f"channel fidelity must lie in [0.5, 1], got {f0!r}")
    p = 2.0 * (1.0 - f0)
    if p == 0.0:
        return QuantumChannel.identity(2)
    ks = [math.sqrt(1.0 - 0.75 * p) * np.eye(2, dtype=complex)]
    ks += [math.sqrt(p / 4.0) * s for s in _PAULIS]
    return QuantumChannel(tuple(ks))


def tensor(*factors):
    """Kronecker product; keeps the state type when all factors share it."""
    if not factors:
        raise ValueError("tensor() needs at least one factor")
    mats = [_matrix(f) for f in factors]
    out = reduce(np.kron, mats)
    if all(isinstance(f, StateVector) for f in factors):
        return StateVector(out)
    if all(isinstance(f, DensityMatrix) for f in factors):
        return DensityMatrix(out)
    return out


def partial_trace(rho, dims: Sequence[int], traced) -> np.ndarray | DensityMatrix:
    """Trace out the subsystems listed in ``traced`` (index or iterable)."""
    m = _matrix(rho)
    dims = list(dims)
    if int(np.prod(dims)) != m.shape[0]:
        raise ValueError(f"dims {dims} do not match matrix of size {m.shape[0]}")
    traced = {traced} if isinstance(traced, int) else set(traced)
    if not traced <= set(range(len(dims))):
        raise ValueError(f"subsystem index out of range: {sorted(traced)}")
    k = len(dims)
    t = m.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:k])
    col = list(letters[k:2 * k])
    for i in traced:
        col[i] = row[i]
    keep = [i for i in range(k) if i not in traced]
    out_idx = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    subscripts = "".join(row) + "".join(col) + "->" + out_idx
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    out = np.einsum(subscripts, t).reshape(dk, dk)
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(out)
    return out


def outcome_probabilities(rho, m: MeasurementOperatorSet) -> np.ndarray:
    r = _matrix(rho)
    if r.shape[0] != m.dim:
        raise ValueError(f"dimension mismatch: state {r.shape[0]} vs measurement {m.dim}")
    return np.array([np.trace(e @ r).real for e in m.elements])


def _psd_sqrt(e: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(e)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def born_sample(rho, m: MeasurementOperatorSet, rng: np.random.Generator):
    """Sample an outcome with probability Tr(M_k rho); returns (k, post-state).

    The post-measurement state uses the Lüders rule sqrt(M_k) rho sqrt(M_k).
    """
    r = _matrix(rho)
    probs = outcome_probabilities(r, m)
    if probs.min() < -VALID_TOL or abs(probs.sum() - 1.0) > VALID_TOL:
        raise ValueError(f"invalid outcome probabilities {probs}")
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    k = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    k = min(k, len(probs) - 1)
    while probs[k] == 0.0:  # guard against landing on a zero cell at the cumsum edge
        k -= 1
    s = _psd_sqrt(m.elements[k])
    post = s @ r @ s / probs[k]
    return k, DensityMatrix.from_unnormalized(post)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Hilbert-Schmidt random state G G^dagger / Tr(G G^dagger)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    return DensityMatrix.from_unnormalized(g @ g.conj().T)


def random_pure_state(dim: int, rng: np.random.Generator) -> StateVector:
    return StateVector.normalized(rng.normal(size=dim) + 1j * rng.normal(size=dim))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_two_outcome_measurement(dim: int, rng: np.random.Generator) -> MeasurementOperatorSet:
    """{E, I - E} with E a random Hermitian contraction with spectrum in [0, 1]."""
    u = random_unitary(dim, rng)
    e = (u * rng.random(dim)) @ u.conj().T
    e = 0.5 * (e + e.conj().T)
    return MeasurementOperatorSet((e, np.eye(dim) - e))
