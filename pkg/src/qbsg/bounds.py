"""Closed-form security bounds for the quantum bit-string generation protocol.

Entropies are in bits.  The Hoeffding slack ``l`` defaults to sqrt(ln n).
Bounds that leave their meaningful range are clamped (bias at 1/2, entropy
at 0 and n); :class:`VacuousBoundWarning` is emitted where the formula's
preconditions fail outright.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field


class VacuousBoundWarning(UserWarning):
    """A bound was requested outside the regime where it says anything."""


def binary_entropy(p: float) -> float:
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"probability out of range: {p!r}")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def hoeffding_tail(l: float) -> float:
    if l <= 0:
        raise ValueError(f"slack l must be positive, got {l!r}")
    return math.exp(-l * l / 2.0)


def default_slack(n: int) -> float:
    return math.sqrt(math.log(n)) if n > 1 else 1.0


def _check_theta(theta: float, allow_zero: bool = False) -> None:
    lo_ok = theta >= 0.0 if allow_zero else theta > 0.0
    if not (lo_ok and theta <= math.pi / 2 + 1e-12):
        raise ValueError(f"theta out of range: {theta!r}")


def theta_from_sin2(sin2: float) -> float:
    if not (0.0 < sin2 <= 1.0):
        raise ValueError(f"sin^2(theta) must lie in (0, 1], got {sin2!r}")
    return math.asin(math.sqrt(sin2))


def bias_cap(y: float, theta: float) -> float:
    """Largest single-round success probability compatible with test fidelity ``y``.

    min{1/2 + sqrt(1-y) / (sqrt(2) sin^2 theta) + (1-y) / sin^2 theta, 1}; concave
    and nonincreasing in y on [0, 1].
    """
    return min(_raw_cap(y, theta), 1.0)


def _raw_cap(y: float, theta: float) -> float:
    if not (0.0 <= y <= 1.0):
        raise ValueError(f"expected fidelity out of [0, 1]: {y!r}")
    _check_theta(theta)
    s2 = math.sin(theta) ** 2
    v = 1.0 - y
    return 0.5 + math.sqrt(v) / (math.sqrt(2.0) * s2) + v / s2


def correctness_delta(n: int, f0: float, f_star: float) -> float:
    """Honest abort-probability bound exp(-n (f0 - f*)^2 / 2)."""
    if n < 1:
        raise ValueError("n must be positive")
    if f0 < f_star:
        warnings.warn(
            f"channel fidelity {f0} below threshold {f_star}: correctness bound is vacuous",
            VacuousBoundWarning,
            stacklevel=2,
        )
        return 1.0
    return math.exp(-n * (f0 - f_star) ** 2 / 2.0)


def bob_bias_bound(theta: float) -> float:
    _check_theta(theta, allow_zero=True)
    return math.sin(theta) / 2.0


def bob_entropy_bound(n: int, theta: float) -> float:
    _check_theta(theta, allow_zero=True)
    return n * binary_entropy(0.5 * (1.0 + math.sin(theta)))


def _slack(n: int, l: float | None) -> float:
    if n < 1:
        raise ValueError("n must be positive")
    l = default_slack(n) if l is None else l
    if l <= 0:
        raise ValueError(f"slack l must be positive, got {l!r}")
    return l


def alice_bias_bound(n: int, theta: float, f_star: float, l: float | None = None, clamp: bool = True) -> float:
    """Bound on a cheating Alice's average bias, valid against adaptive attacks.

    2 exp(-l^2/2) + cap(f* - l/sqrt(n)) + l/sqrt(n) - 1/2, clamped at 1/2.
    With ``clamp=False`` neither the result nor the cap inside is clamped.
    """
    l = _slack(n, l)
    if not (0.0 < f_star <= 1.0):
        raise ValueError(f"f_star must lie in (0, 1], got {f_star!r}")
    y = f_star - l / math.sqrt(n)
    if y < 0.0:
        warnings.warn("f* - l/sqrt(n) < 0: Alice bias bound is vacuous", VacuousBoundWarning, stacklevel=2)
        return 0.5
    cap = bias_cap(y, theta) if clamp else _raw_cap(y, theta)
    raw = 2.0 * hoeffding_tail(l) + cap + l / math.sqrt(n) - 0.5
    return min(raw, 0.5) if clamp else raw


def alice_entropy_bound(n: int, theta: float, f_star: float, l: float | None = None, clamp: bool = True) -> float:
    """Lower bound -n log2 cap(f* - l/sqrt(n)) (1 - exp(-l^2/2)) on Bob's output entropy."""
    l = _slack(n, l)
    if not (0.0 < f_star <= 1.0):
        raise ValueError(f"f_star must lie in (0, 1], got {f_star!r}")
    y = f_star - l / math.sqrt(n)
    if y < 0.0:
        warnings.warn("f* - l/sqrt(n) < 0: Alice entropy bound is vacuous", VacuousBoundWarning, stacklevel=2)
        return 0.0
    if clamp:
        raw = -n * math.log2(bias_cap(y, theta)) * (1.0 - hoeffding_tail(l))
        return 0.0 if raw <= 0.0 else min(raw, float(n))
    return -n * math.log2(_raw_cap(y, theta)) * (1.0 - hoeffding_tail(l))


def noiseless_bias_theta(n: int) -> float:
    """Signal angle balancing both parties' bias: sin^2 theta = (ln n / n)^(1/6)."""
    return theta_from_sin2((math.log(n) / n) ** (1.0 / 6.0))


def noiseless_entropy_theta(n: int) -> float:
    """Signal angle balancing both entropies: sin^2 theta = (ln n / n)^(1/8)."""
    return theta_from_sin2((math.log(n) / n) ** (1.0 / 8.0))


@dataclass(frozen=True)
class BoundParams:
    n: int
    theta: float
    f_star: float
    l: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        _check_theta(self.theta, allow_zero=True)
        if not (0.0 < self.f_star <= 1.0):
            raise ValueError("f_star must lie in (0, 1]")
        if self.l <= 0:
            raise ValueError("l must be positive")

    @classmethod
    def with_default_slack(cls, n: int, theta: float, f_star: float) -> "BoundParams":
        return cls(n, theta, f_star, default_slack(n))


@dataclass
class SecurityReport:
    regime: str
    n: int
    f_star: float
    l: float
    theta_bias: float
    theta_entropy: float
    eps_A_bound: float
    eps_B_bound: float
    H_A_bound: float
    H_B_bound: float
    delta_n: float | None
    channel_fidelity: float | None = None
    vacuous: dict = field(default_factory=dict)

    @property
    def eps_total(self) -> float:
        return self.eps_A_bound + self.eps_B_bound

    @property
    def beats_classical(self) -> bool:
        return self.eps_total < 0.5

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eps_total"] = self.eps_total
        d["beats_classical_bias"] = self.beats_classical
        d["sin2_theta_bias"] = math.sin(self.theta_bias) ** 2
        d["sin2_theta_entropy"] = math.sin(self.theta_entropy) ** 2
        return d


def _vacuity(eps_a_raw: float, eps_b: float, h_a: float, h_b: float) -> dict:
    return {
        "eps_A": eps_a_raw >= 0.5,
        "eps_B": eps_b >= 0.5,
        "H_A": h_a <= 0.0,
        "H_B": h_b <= 0.0,
        "total": eps_a_raw + eps_b >= 0.5,
    }


def noiseless_report(n: int, l: float | None = None) -> SecurityReport:
    """Bounds with f* = 1 and the n-dependent signal angles of the noiseless regime.

    The bias figures use sin^2 theta = (ln n/n)^(1/6); the entropy figures use
    (ln n/n)^(1/8).  With a perfect channel the honest test never fails, so
    delta_n = 0.
    """
    if n < 3:
        raise ValueError("noiseless regime needs n >= 3")
    l = _slack(n, l)
    tb, te = noiseless_bias_theta(n), noiseless_entropy_theta(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", VacuousBoundWarning)
        ea_raw = alice_bias_bound(n, tb, 1.0, l, clamp=False)
        ha = alice_entropy_bound(n, te, 1.0, l)
    eb = bob_bias_bound(tb)
    hb = bob_entropy_bound(n, te)
    return SecurityReport(
        regime="noiseless", n=n, f_star=1.0, l=l, theta_bias=tb, theta_entropy=te,
        eps_A_bound=min(ea_raw, 0.5), eps_B_bound=eb, H_A_bound=ha, H_B_bound=hb,
        delta_n=0.0, channel_fidelity=1.0, vacuous=_vacuity(ea_raw, eb, ha, hb),
    )


def noisy_report(n: int, theta: float, f_star: float, channel_fidelity: float | None = None,
                 l: float | None = None) -> SecurityReport:
    """Bounds at fixed signal angle and test threshold f* < channel fidelity."""
    l = _slack(n, l)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", VacuousBoundWarning)
        if theta > 0:
            ea_raw = alice_bias_bound(n, theta, f_star, l, clamp=False)
            ha = alice_entropy_bound(n, theta, f_star, l)
        else:
            ea_raw, ha = 0.5, 0.0
        delta = None
        if channel_fidelity is not None:
            delta = correctness_delta(n, channel_fidelity, f_star)
    eb = bob_bias_bound(theta)
    hb = bob_entropy_bound(n, theta)
    return SecurityReport(
        regime="noisy", n=n, f_star=f_star, l=l, theta_bias=theta, theta_entropy=theta,
        eps_A_bound=min(ea_raw, 0.5), eps_B_bound=eb, H_A_bound=ha, H_B_bound=hb,
        delta_n=delta, channel_fidelity=channel_fidelity, vacuous=_vacuity(ea_raw, eb, ha, hb),
    )


@dataclass(frozen=True)
class ThresholdResult:
    theta: float
    n: int
    l: float
    f_star: float | None          # None means unattainable at this n
    closed_form_f_star: float | None
    asymptotic_f_star: float | None

    @property
    def attainable(self) -> bool:
        return self.f_star is not None

    def required_channel_fidelity(self, delta_target: float) -> float | None:
        """Channel fidelity giving correctness_delta <= delta_target at this f*."""
        if self.f_star is None:
            return None
        f0 = self.f_star + math.sqrt(2.0 * math.log(1.0 / delta_target) / self.n)
        return f0 if f0 <= 1.0 else None


def _total_bias(n: int, theta: float, f_star: float, l: float) -> float:
    if theta == 0:
        return 0.5
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", VacuousBoundWarning)
        return alice_bias_bound(n, theta, f_star, l) + bob_bias_bound(theta)


def threshold_closed_form(n: int, theta: float, l: float) -> float | None:
    """Root of eps_A + eps_B = 1/2, solved as a quadratic in sqrt(1 - f* + l/sqrt(n)).

    Valid while the cap is unclamped, which holds at the root.  Returns None
    when no root exists with f* <= 1.
    """
    s2 = math.sin(theta) ** 2
    d = l / math.sqrt(n)
    k = 2.0 * hoeffding_tail(l) + d + math.sin(theta) / 2.0 - 0.5
    # u^2 / s2 + u / (sqrt2 s2) + k = 0
    a, b = 1.0 / s2, 1.0 / (math.sqrt(2.0) * s2)
    disc = b * b - 4.0 * a * k
    if disc < 0:
        return None
    u = (-b + math.sqrt(disc)) / (2.0 * a)
    if u < math.sqrt(d):
        return None
    return 1.0 + d - u * u


def threshold_asymptotic(theta: float) -> float | None:
    """Large-n root of sqrt(1-f*)/(sqrt2 s2) + (1-f*)/s2 = 1/2 - sin(theta)/2, s2 = sin^2 theta."""
    s2 = math.sin(theta) ** 2
    rhs = 0.5 - math.sin(theta) / 2.0
    if rhs <= 0:
        return None
    a, b = 1.0 / s2, 1.0 / (math.sqrt(2.0) * s2)
    u = (-b + math.sqrt(b * b + 4.0 * a * rhs)) / (2.0 * a)
    return 1.0 - u * u


def quantum_vs_classical_threshold(theta: float, n: int, l: float | None = None,
                                   tol: float = 1e-6) -> ThresholdResult:
    """Smallest f* at which eps_A + eps_B < 1/2, located by bisection.

    eps_A decreases as f* grows, so the feasible set is an interval ending at
    f* = 1.  The returned value is the feasible end of the final bracket.
    """
    _check_theta(theta, allow_zero=True)
    l = _slack(n, l)
    closed = threshold_closed_form(n, theta, l) if theta > 0 else None
    asym = threshold_asymptotic(theta) if theta > 0 else None
    if _total_bias(n, theta, 1.0, l) >= 0.5:
        return ThresholdResult(theta, n, l, None, None, asym)
    lo, hi = 0.0, 1.0
    if _total_bias(n, theta, tol, l) < 0.5:
        return ThresholdResult(theta, n, l, tol, closed, asym)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _total_bias(n, theta, mid, l) < 0.5:
            hi = mid
        else:
            lo = mid
    return ThresholdResult(theta, n, l, hi, closed, asym)
