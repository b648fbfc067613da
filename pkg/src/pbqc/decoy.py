"""Weak-coherent-source analysis with and without decoy intensities.

All statistics are asymptotic expectations.  The adversary model splits on the
photon number: vacuum pulses are never reported, single photons are attacked
with the continuous-basis strategy (Q1 = R1/4), and multi-photon pulses are
assumed to be reported without error.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

POISSON_TAIL = 1e-15
DARK_COUNT_ERROR = 0.5
RATE_TOL = 1e-12


@dataclass(frozen=True)
class ChannelModel:
    """Overall transmittance ``eta``, dark-count probability ``y0`` and
    misalignment error ``e_det`` of the verifier-to-prover link."""

    eta: float = 1.0
    y0: float = 1e-5
    e_det: float = 0.01

    def __post_init__(self) -> None:
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if not 0.0 <= self.y0 < 1.0:
            raise ValueError(f"y0 must lie in [0, 1), got {self.y0}")
        if not 0.0 <= self.e_det < 0.5:
            raise ValueError(f"e_det must lie in [0, 1/2), got {self.e_det}")

    def with_eta(self, eta: float) -> "ChannelModel":
        return replace(self, eta=eta)


@dataclass(frozen=True)
class IntensityPair:
    """Signal intensity ``mu1`` and decoy intensity ``mu2`` (``mu1 > mu2 >= 0``)."""

    mu1: float
    mu2: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu1) and math.isfinite(self.mu2)):
            raise ValueError("intensities must be finite")
        if self.mu2 < 0.0:
            raise ValueError(f"mu2 must be non-negative, got {self.mu2}")
        if not self.mu1 > self.mu2:
            raise ValueError(f"need mu1 > mu2, got mu1={self.mu1}, mu2={self.mu2}")


@dataclass(frozen=True)
class ObservedStats:
    rate: float
    qber: float
    degenerate: bool = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rate) and math.isfinite(self.qber)):
            raise ValueError("statistics must be finite")


def poisson_weights(mu: float, tail: float = POISSON_TAIL) -> np.ndarray:
    """P_n = mu^n e^{-mu} / n!, truncated once the remaining tail is below ``tail``."""
    if mu < 0:
        raise ValueError(f"mu must be non-negative, got {mu}")
    weights = [math.exp(-mu)]
    n = 0
    while True:
        n += 1
        weights.append(weights[-1] * mu / n)
        # sum_{k>n} P_k <= P_n * mu / (n + 1 - mu) once n + 1 > mu
        if n + 1 > mu and weights[-1] * mu / (n + 1 - mu) < tail:
            break
    return np.array(weights)


def honest_stats(channel: ChannelModel, mu: float) -> ObservedStats:
    """Expected reporting rate and QBER of an honest prover at intensity ``mu``."""
    if mu < 0:
        raise ValueError(f"mu must be non-negative, got {mu}")
    signal = -math.expm1(-channel.eta * mu)
    rate = channel.y0 + signal
    if rate == 0.0:
        return ObservedStats(0.0, 0.0, degenerate=True)
    qber = (DARK_COUNT_ERROR * channel.y0 + channel.e_det * signal) / rate
    return ObservedStats(rate, qber)


def adversary_stats(mu: float, r1: float) -> ObservedStats:
    """Overall rate and QBER when single photons are reported at rate ``r1``."""
    if not 0.0 <= r1 <= 1.0:
        raise ValueError(f"r1 must lie in [0, 1], got {r1}")
    p1 = mu * math.exp(-mu)
    multi = -math.expm1(-mu) - p1
    rate = p1 * r1 + multi
    if rate == 0.0:
        return ObservedStats(0.0, 0.0, degenerate=True)
    return ObservedStats(rate, p1 * r1 * r1 / (4.0 * rate))


def adversary_stats_by_sum(mu: float, r1: float) -> ObservedStats:
    """``adversary_stats`` evaluated as explicit Poisson sums (cross-check)."""
    weights = poisson_weights(mu)
    n = np.arange(len(weights))
    rates = np.where(n == 0, 0.0, np.where(n == 1, r1, 1.0))
    qbers = np.where(n == 1, r1 / 4.0, 0.0)
    rate = float(np.sum(weights * rates))
    if rate == 0.0:
        return ObservedStats(0.0, 0.0, degenerate=True)
    return ObservedStats(rate, float(np.sum(weights * rates * qbers)) / rate)


def required_single_photon_rate(channel: ChannelModel, mu: float) -> float:
    """r1 that makes the adversary's overall rate equal the honest rate.

    May fall outside [0, 1]: negative when multi-photon pulses alone already
    exceed the honest rate, above one when no strategy reaches it.
    """
    p1 = mu * math.exp(-mu)
    multi = -math.expm1(-mu) - p1
    return (honest_stats(channel, mu).rate - multi) / p1


def no_decoy_attack_feasible(channel: ChannelModel, mu: float) -> bool:
    """True if the adversary can reproduce the honest rate at no more than the
    honest QBER using only the signal intensity (i.e. the protocol is insecure).

    When multi-photon pulses alone overshoot the honest rate, the adversary
    reports none of the single photons and discards a fraction of the
    multi-photon pulses, matching the rate with zero QBER.
    """
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    r1 = required_single_photon_rate(channel, mu)
    # r1 == 1 exactly when y0 == 0 and eta == 1; allow for rounding
    if r1 > 1.0 + RATE_TOL:
        return False
    r1 = min(r1, 1.0)
    honest = honest_stats(channel, mu)
    if r1 <= 0.0:
        return True
    adv_qber = mu * math.exp(-mu) * r1 * r1 / (4.0 * honest.rate)
    return adv_qber <= honest.qber


def decoy_lower_bound_r1(
    stats_mu1: ObservedStats, stats_mu2: ObservedStats, intensities: IntensityPair
) -> float:
    """Lower bound on the single-photon reporting rate from two intensities, clamped to [0, 1]."""
    mu1, mu2 = intensities.mu1, intensities.mu2
    if not mu1 > mu2 > 0.0:
        raise ValueError(f"need mu1 > mu2 > 0, got mu1={mu1}, mu2={mu2}")
    r_1, q_1, r_2 = stats_mu1.rate, stats_mu1.qber, stats_mu2.rate
    bound = (
        mu1
        / (mu1 * mu2 - mu2 * mu2)
        * (
            r_2 * math.exp(mu2)
            - r_1 * math.exp(mu1) * mu2 * mu2 / (mu1 * mu1)
            - 2.0 * q_1 * r_1 * math.exp(mu1) * (mu1 * mu1 - mu2 * mu2) / (mu1 * mu1)
        )
    )
    return min(max(bound, 0.0), 1.0)


def decoy_qber_lower_bound(channel: ChannelModel, intensities: IntensityPair) -> float:
    """Smallest QBER the adversary can produce at the signal intensity while
    matching both intensities' honest rates."""
    s1 = honest_stats(channel, intensities.mu1)
    s2 = honest_stats(channel, intensities.mu2)
    r1_low = decoy_lower_bound_r1(s1, s2, intensities)
    mu1 = intensities.mu1
    if s1.rate == 0.0:
        return 0.0
    return mu1 * math.exp(-mu1) * r1_low * r1_low / (4.0 * s1.rate)


def decoy_attack_detected(channel: ChannelModel, intensities: IntensityPair) -> bool:
    """True (secure) when the adversary's minimal QBER exceeds the honest QBER."""
    q_low = decoy_qber_lower_bound(channel, intensities)
    return q_low > honest_stats(channel, intensities.mu1).qber


def is_secure(channel: ChannelModel, intensities: IntensityPair, use_decoy: bool) -> bool:
    if use_decoy:
        return decoy_attack_detected(channel, intensities)
    return not no_decoy_attack_feasible(channel, intensities.mu1)


def loss_db(eta: float) -> float:
    return -10.0 * math.log10(eta)


class NonMonotoneDecisionError(ValueError):
    """The security decision is not a single insecure-to-secure step in eta."""

    def __init__(self, message: str, trace: list[dict]):
        super().__init__(message)
        self.trace = trace


@dataclass
class BoundaryResult:
    """Transmittance below which the protocol is insecure.

    ``secure_everywhere`` / ``insecure_everywhere`` flag searches where the
    decision never changed on the scanned range; ``eta_star`` is then the
    corresponding end of the range.
    """

    parameters: dict
    eta_star: float
    loss_db: float
    decision_trace: list[dict] = field(default_factory=list)
    secure_everywhere: bool = False
    insecure_everywhere: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def security_boundary(
    template: ChannelModel,
    intensities: IntensityPair,
    use_decoy: bool,
    tol: float = 1e-4,
    eta_min: float = 1e-6,
    n_scan: int = 121,
) -> BoundaryResult:
    """Locate the insecure/secure transition in eta by scan plus bisection.

    The scan runs on a log grid over ``[eta_min, 1]`` and must show a single
    step from insecure to secure, otherwise ``NonMonotoneDecisionError`` is
    raised carrying the scan.  Bisection then narrows the bracketing scan cell
    to ``tol`` in absolute eta.
    """
    params = {
        "y0": template.y0,
        "e_det": template.e_det,
        "mu1": intensities.mu1,
        "mu2": intensities.mu2 if use_decoy else None,
        "mode": "decoy" if use_decoy else "no-decoy",
        "tol": tol,
    }

    def decide(eta: float) -> bool:
        return is_secure(template.with_eta(eta), intensities, use_decoy)

    grid = np.geomspace(eta_min, 1.0, n_scan)
    grid[-1] = 1.0
    trace = [{"eta": float(e), "secure": decide(float(e))} for e in grid]
    flags = [t["secure"] for t in trace]
    first_secure = flags.index(True) if True in flags else len(flags)
    if any(not f for f in flags[first_secure:]):
        raise NonMonotoneDecisionError(
            "security decision is not monotone in eta over the scan grid", trace
        )
    if first_secure == 0:
        return BoundaryResult(params, eta_min, loss_db(eta_min), trace, secure_everywhere=True)
    if first_secure == len(flags):
        return BoundaryResult(params, 1.0, 0.0, trace, insecure_everywhere=True)

    lo, hi = float(grid[first_secure - 1]), float(grid[first_secure])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        secure = decide(mid)
        trace.append({"eta": mid, "secure": secure})
        if secure:
            hi = mid
        else:
            lo = mid
    trace.sort(key=lambda t: t["eta"])
    return BoundaryResult(params, hi, loss_db(hi), trace)


def intensity_grid(
    mu1_values: Iterable[float], mu2_values: Sequence[float] | None = None
) -> list[IntensityPair]:
    """All pairs with mu1 > mu2 (or signal-only pairs when ``mu2_values`` is None)."""
    if mu2_values is None:
        return [IntensityPair(float(m)) for m in mu1_values if m > 0]
    return [
        IntensityPair(float(m1), float(m2))
        for m1 in mu1_values
        for m2 in mu2_values
        if m1 > m2 > 0
    ]


def scan_intensities(
    template: ChannelModel,
    use_decoy: bool,
    grid: Sequence[IntensityPair],
    tol: float = 1e-6,
) -> list[tuple[IntensityPair, BoundaryResult]]:
    """``security_boundary`` at every grid point, in grid order."""
    return [(pair, security_boundary(template, pair, use_decoy, tol=tol)) for pair in grid]


def best_intensities(
    scan: Sequence[tuple[IntensityPair, BoundaryResult]],
) -> tuple[IntensityPair, BoundaryResult]:
    """Smallest eta*; ties go to the larger mu1 (then mu2)."""
    if not scan:
        raise ValueError("empty intensity grid")
    return min(scan, key=lambda item: (item[1].eta_star, -item[0].mu1, -item[0].mu2))


def optimize_intensities(
    template: ChannelModel,
    use_decoy: bool,
    grid: Sequence[IntensityPair],
    tol: float = 1e-6,
) -> tuple[IntensityPair, BoundaryResult]:
    """Grid point with the smallest eta*; ties go to the larger mu1 (then mu2).

    The bisection tolerance is finer than ``security_boundary``'s default
    because neighbouring grid points differ in eta* by ~1e-4 near the optimum.
    """
    if not grid:
        raise ValueError("empty intensity grid")
    return best_intensities(scan_intensities(template, use_decoy, grid, tol))
