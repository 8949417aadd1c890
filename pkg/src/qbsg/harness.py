"""Monte Carlo estimation of abort rates, biases and entropies.

Two execution paths produce statistically identical trials:

* ``kernel``: when every round is an independent draw from a tabulated
  four-cell distribution over (test passed, output bit hits target), the
  exact per-round tables are built once and rounds are sampled in the
  compiled kernel.  Trials are grouped in fixed blocks, each with its own
  counter-based random stream, so results do not depend on thread count.
* ``reference``: every trial is a full quantum-state simulation through
  :func:`qbsg.protocol.run_protocol`.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from . import kernels, strategies
from .bounds import bias_cap, hoeffding_tail
from .protocol import ProtocolParams, run_protocol
from .strategies import HonestBob, MeasuringBob, PolicyAlice

BLOCK = 2048
MAX_ENTROPY_BITS = 12
THREADS_ENV = "QBSG_THREADS"


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class TrialBatch:
    params: ProtocolParams
    alice: object
    bob: object
    trials: int
    master_seed: int
    target: str = "0"   # single bit is repeated over all rounds
    path: str = "auto"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.path not in ("auto", "kernel", "reference"):
            raise ValueError(f"path must be auto, kernel or reference, got {self.path!r}")
        object.__setattr__(self, "master_seed", int(self.master_seed) & (2**64 - 1))

    @property
    def target_bits(self) -> np.ndarray:
        return strategies._bits(self.target, self.params.n)

    @property
    def honest_party(self) -> str:
        return "alice" if getattr(self.bob, "replaces_channel", False) else "bob"


@dataclass
class RoundTables:
    cum: np.ndarray      # (K, 2, 4) cumulative cell probabilities
    choice: np.ndarray   # (n, n+1) int32
    targets: np.ndarray  # (n,) uint8
    ef: np.ndarray       # (K,) expected pass probability per menu entry
    fb: np.ndarray       # (K,) bias cap at that pass probability
    bob_tests: bool      # False when Bob reports every test as passed


def round_tables(batch: TrialBatch) -> RoundTables | None:
    """Exact per-round tables for the batch, or None if rounds are not tabulable."""
    p = batch.params
    alice, bob = batch.alice, batch.bob
    if not isinstance(alice, PolicyAlice):
        return None
    table = strategies.as_table(alice.policy, p.n)
    if table is None:
        return None
    if table.adaptive and not p.reveals:
        raise ValueError("an adaptive Alice policy needs the revealed-outcome variant")
    bypass = alice.replaces_channel or bob.replaces_channel
    channel = None if bypass else p.channel
    k = len(table.menu)
    cum = np.zeros((k, 2, 4))
    ef = np.zeros(k)
    fb = np.zeros(k)
    targets = batch.target_bits
    if alice.replaces_channel and not np.array_equal(table.targets, targets):
        raise ValueError("cheating Alice aims at a different string than the batch target")
    if type(bob) is HonestBob:
        for j, s in enumerate(table.menu):
            for t in (0, 1):
                cells = strategies.round_cells_vs_honest_bob(strategies.retarget(s, t), p.theta, channel)
                cum[j, t] = strategies.cumulative_cells(cells)
            ef[j] = strategies.analyze_single_round(s, p.theta, channel).E_f
            fb[j] = bias_cap(min(max(ef[j], 0.0), 1.0), p.theta)
        tests = True
    elif type(bob) is MeasuringBob:
        if table.adaptive:
            return None
        if not np.array_equal(bob.targets, targets):
            raise ValueError("cheating Bob aims at a different string than the batch target")
        for j, s in enumerate(table.menu):
            for t in (0, 1):
                cells = strategies.round_cells_vs_measuring_bob(strategies.retarget(s, t), bob.guess, channel)
                cum[j, t] = strategies.cumulative_cells(cells)
            ef[j] = 1.0
            fb[j] = 0.5
        tests = False
    else:
        return None
    return RoundTables(cum, table.choice, np.ascontiguousarray(targets, dtype=np.uint8), ef, fb, tests)


@dataclass
class TrialOutcomes:
    """Per-trial raw results; ``code`` holds the honest party's first min(n, 63) output bits."""

    n: int
    sum_f: np.ndarray
    sum_q: np.ndarray
    code: np.ndarray
    sum_ef: np.ndarray
    sum_fb: np.ndarray
    aborted: np.ndarray
    replacement_q: np.ndarray     # matches of a uniform replacement string with the target
    replacement_code: np.ndarray  # uniform replacement output code
    path: str

    @property
    def code_bits(self) -> int:
        return min(self.n, kernels.OUTPUT_BITS)

    def never_abort_q(self) -> np.ndarray:
        return np.where(self.aborted, self.replacement_q, self.sum_q)

    def never_abort_code(self) -> np.ndarray:
        return np.where(self.aborted, self.replacement_code, self.code)

    def leading_bits(self, k: int, conditioned: bool = True) -> np.ndarray:
        """First k output bits of each trial (non-aborted trials only by default)."""
        if k > self.code_bits:
            raise ValueError(f"only {self.code_bits} output bits are recorded")
        codes = self.code[~self.aborted] if conditioned else self.never_abort_code()
        return codes >> np.uint64(self.code_bits - k)


def _block_stream(seed: int, block: int, lane: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block, lane))))


def _replacements(seed: int, block: int, m: int, n: int):
    rng = _block_stream(seed, block, 1)
    q = rng.binomial(n, 0.5, size=m).astype(np.int64)
    bits = min(n, kernels.OUTPUT_BITS)
    code = rng.integers(0, 2**bits, size=m, dtype=np.uint64)
    return q, code


def _kernel_block(batch: TrialBatch, tables: RoundTables, block: int, m: int):
    n = batch.params.n
    u = _block_stream(batch.master_seed, block, 0).random((m, n))
    out = kernels.sample_rounds(u, tables.cum, tables.choice, tables.targets, tables.ef, tables.fb)
    rq, rc = _replacements(batch.master_seed, block, m, n)
    return out + (rq, rc)


def _trial_seed(master: int, t: int) -> int:
    s = np.random.SeedSequence(master, spawn_key=(t, 2)).generate_state(2, np.uint32)
    return int(s[0]) | (int(s[1]) << 32)


def _reference_trials(batch: TrialBatch, start: int, stop: int):
    p = batch.params
    tgt = batch.target_bits
    tests = not batch.bob.replaces_channel
    bypass = batch.alice.replaces_channel or batch.bob.replaces_channel
    channel = None if bypass else p.channel
    policy = getattr(batch.alice, "policy", None)
    cache: dict[int, float] = {}
    res = [[] for _ in range(6)]
    bits = min(p.n, kernels.OUTPUT_BITS)
    for t in range(start, stop):
        outcome, tr = run_protocol(p, batch.alice, batch.bob, _trial_seed(batch.master_seed, t))
        x = [r.x for r in tr.rounds]
        q = sum(int(xi == ci) for xi, ci in zip(x, tgt))
        code = 0
        for xi in x[:bits]:
            code = (code << 1) | xi
        se = sb = 0.0
        if policy is not None:
            view = []
            for r in tr.rounds:
                s = policy(tuple(view))
                if id(s) not in cache:
                    cache[id(s)] = strategies.analyze_single_round(s, p.theta, channel).E_f
                e = cache[id(s)] if tests else 1.0
                se += e
                sb += bias_cap(min(max(e, 0.0), 1.0), p.theta)
                view.append(r if p.reveals else type(r)(r.a, r.b, None, None))
        honest_out = outcome.x if batch.honest_party == "alice" else outcome.y
        for lst, v in zip(res, (tr.passes, q, code, se, sb, honest_out is None)):
            lst.append(v)
    return res


def run_trials(batch: TrialBatch, threads: int | None = None) -> TrialOutcomes:
    p = batch.params
    threads = default_threads() if threads is None else max(1, threads)
    tables = round_tables(batch) if batch.path in ("auto", "kernel") else None
    if batch.path == "kernel" and tables is None:
        raise ValueError("strategies do not admit the tabulated kernel path")
    n_blocks = (batch.trials + BLOCK - 1) // BLOCK
    sizes = [min(BLOCK, batch.trials - b * BLOCK) for b in range(n_blocks)]
    if tables is not None:
        def work(b):
            return _kernel_block(batch, tables, b, sizes[b])

        if threads > 1 and n_blocks > 1:
            with ThreadPoolExecutor(threads) as ex:
                parts = list(ex.map(work, range(n_blocks)))
        else:
            parts = [work(b) for b in range(n_blocks)]
        sum_f, sum_q, code, sum_ef, sum_fb, rq, rc = (np.concatenate(x) for x in zip(*parts))
        if tables.bob_tests:
            aborted = sum_f < p.n * p.f_star - 1e-9 * p.n
        else:
            aborted = np.zeros(batch.trials, dtype=bool)
        path = "kernel"
    else:
        res = _reference_trials(batch, 0, batch.trials)
        sum_f = np.array(res[0], dtype=np.int64)
        sum_q = np.array(res[1], dtype=np.int64)
        code = np.array(res[2], dtype=np.uint64)
        sum_ef = np.array(res[3], dtype=np.float64)
        sum_fb = np.array(res[4], dtype=np.float64)
        aborted = np.array(res[5], dtype=bool)
        reps = [_replacements(batch.master_seed, b, sizes[b], p.n) for b in range(n_blocks)]
        rq = np.concatenate([r[0] for r in reps])
        rc = np.concatenate([r[1] for r in reps])
        path = "reference"
    return TrialOutcomes(p.n, sum_f, sum_q, code, sum_ef, sum_fb, aborted, rq, rc, path)


@dataclass
class EmpiricalStats:
    trials: int
    n: int
    target: str
    path: str
    honest_party: str
    abort_rate: float
    abort_se: float
    mean_f: float
    mean_f_se: float
    mean_match: float
    mean_bias: float
    bias_se: float
    plug_in_entropy: float | None
    entropy_note: str
    martingale: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    m = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    return m, se


def plug_in_entropy(codes: np.ndarray, n: int) -> float:
    counts = np.bincount(codes.astype(np.int64), minlength=1 << n)
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum())


def summarize(batch: TrialBatch, out: TrialOutcomes) -> EmpiricalStats:
    n = batch.params.n
    ab = out.aborted.astype(np.float64)
    abort_rate, abort_se = _mean_se(ab)
    mf, mf_se = _mean_se(out.sum_f / n)
    match = out.never_abort_q() / n
    mm, mm_se = _mean_se(match)
    if n <= MAX_ENTROPY_BITS:
        h = plug_in_entropy(out.never_abort_code(), n)
        note = f"plug-in estimate, downward bias about {((1 << n) - 1) / (2 * batch.trials * math.log(2)):.3g} bits"
    else:
        h = None
        note = f"omitted: n = {n} exceeds {MAX_ENTROPY_BITS} bits"
    return EmpiricalStats(
        trials=batch.trials, n=n, target=batch.target, path=out.path, honest_party=batch.honest_party,
        abort_rate=abort_rate, abort_se=abort_se, mean_f=mf, mean_f_se=mf_se,
        mean_match=mm, mean_bias=mm - 0.5, bias_se=mm_se,
        plug_in_entropy=h, entropy_note=note,
    )


def monte_carlo(batch: TrialBatch, threads: int | None = None) -> EmpiricalStats:
    return summarize(batch, run_trials(batch, threads))


@dataclass(frozen=True)
class MartingaleCheck:
    l: float
    trials: int
    f_rate: float
    q_rate: float
    bound: float

    @property
    def sigma(self) -> float:
        """Sampling standard deviation of a rate equal to the bound."""
        b = min(self.bound, 1.0)
        return math.sqrt(b * (1 - b) / self.trials)

    @property
    def passed(self) -> bool:
        limit = self.bound + 3 * self.sigma
        return self.f_rate <= limit and self.q_rate <= limit

    def to_dict(self) -> dict:
        return {"l": self.l, "trials": self.trials, "f_rate": self.f_rate, "q_rate": self.q_rate,
                "bound": self.bound, "sigma": self.sigma, "passed": self.passed}


def martingale_tail_check(batch: TrialBatch, l, threads: int | None = None,
                          outcomes: TrialOutcomes | None = None):
    """Exceedance rates of sum(f_i - E f_i) >= l sqrt(n) and sum(q_i - F(E f_i)) >= l sqrt(n).

    ``l`` may be a single value or a sequence; a list is returned for a sequence.
    """
    if not isinstance(batch.alice, PolicyAlice):
        raise ValueError("martingale check needs a policy-driven Alice with analytic round expectations")
    if not batch.params.reveals:
        raise ValueError("martingale check runs on the revealed-outcome variant")
    out = run_trials(batch, threads) if outcomes is None else outcomes
    n = batch.params.n
    ls = [l] if np.isscalar(l) else list(l)
    res = []
    for li in ls:
        if li <= 0:
            raise ValueError("slack l must be positive")
        thr = li * math.sqrt(n)
        ef_ev = (out.sum_f - out.sum_ef) >= thr
        q_ev = (out.sum_q - out.sum_fb) >= thr
        res.append(MartingaleCheck(float(li), batch.trials, float(ef_ev.mean()), float(q_ev.mean()),
                                   hoeffding_tail(li)))
    return res[0] if np.isscalar(l) else res


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float
    alpha: float

    @property
    def passed(self) -> bool:
        return self.p_value >= self.alpha


def chi_square_uniformity(samples, n: int, alpha: float = 1e-3) -> ChiSquareResult:
    """Pearson test of n-bit string codes against the uniform distribution."""
    if not (1 <= n <= 8):
        raise ValueError(f"chi-square uniformity supports 1 <= n <= 8, got {n}")
    codes = np.asarray(samples, dtype=np.int64)
    need = 50 * (1 << n)
    if codes.size < need:
        raise ValueError(f"need at least {need} samples for n = {n}, got {codes.size}")
    if codes.min() < 0 or codes.max() >= (1 << n):
        raise ValueError("samples are not n-bit string codes")
    counts = np.bincount(codes, minlength=1 << n)
    stat, pv = sps.chisquare(counts)
    return ChiSquareResult(float(stat), (1 << n) - 1, float(pv), alpha)
