"""Intercept strategies against the single-photon multi-basis protocol.

The adversary pair measures every intercepted qubit in one fixed basis, learns
the verifiers' basis from the classical relay, and then for each basis either
reports its outcome, reports the flipped outcome, or claims no detection.
A strategy therefore is a three-way partition of the basis set, and its
performance is the pair (reporting rate R1, QBER Q1).
"""
from __future__ import annotations

import csv
import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import IO, Any, Sequence

import numpy as np

from .bloch import (
    NORTH_POLE,
    BasisLattice,
    BlochAngles,
    build_lattice,
    error_probabilities,
    error_probability,
    ring_size,
)

TOL = 1e-12
BRUTE_FORCE_MAX_N = 3


class Action(enum.Enum):
    REPORT = "report"
    FLIP = "flip"
    SILENT = "silent"


@dataclass(frozen=True)
class StrategyPartition:
    """One action per lattice pixel, in the lattice's pixel order."""

    actions: tuple[Action, ...]

    def __post_init__(self) -> None:
        acts = tuple(self.actions)
        for a in acts:
            if not isinstance(a, Action):
                raise ValueError(f"unknown action {a!r}")
        object.__setattr__(self, "actions", acts)

    def __len__(self) -> int:
        return len(self.actions)

    def indices(self, action: Action) -> np.ndarray:
        return np.array([i for i, a in enumerate(self.actions) if a is action], dtype=int)

    @classmethod
    def silent(cls, lattice: BasisLattice) -> "StrategyPartition":
        return cls((Action.SILENT,) * lattice.k_count)

    @classmethod
    def uniform(cls, lattice: BasisLattice, action: Action) -> "StrategyPartition":
        return cls((action,) * lattice.k_count)


@dataclass(frozen=True)
class RQPoint:
    """Reporting rate and QBER of one strategy.

    Arbitrary partitions may exceed a QBER of 1/2; such points are never on a
    frontier since flipping every reported bit improves them.
    """

    reporting_rate: float
    qber: float

    def __post_init__(self) -> None:
        r, q = float(self.reporting_rate), float(self.qber)
        if not (-TOL <= r <= 1.0 + TOL):
            raise ValueError(f"reporting rate must lie in [0, 1], got {r}")
        if not (-TOL <= q <= 1.0 + TOL):
            raise ValueError(f"qber must lie in [0, 1], got {q}")
        r = min(max(r, 0.0), 1.0)
        q = 0.0 if r == 0.0 else min(max(q, 0.0), 1.0)
        object.__setattr__(self, "reporting_rate", r)
        object.__setattr__(self, "qber", q)

    @property
    def error_mass(self) -> float:
        """R1 * Q1: the quantity that mixes linearly between strategies."""
        return self.reporting_rate * self.qber


@dataclass(frozen=True)
class StrategyFrontier:
    """Pareto-optimal (R1, Q1) points, sorted by strictly increasing R1.

    ``generators`` labels each point (``m0`` for threshold strategies,
    ``Theta0`` for the continuous family, per-ring counts for brute force).
    A ``continuous`` frontier is the exact curve Q1 = R1/4; its points are a
    sampling of it.
    """

    points: tuple[RQPoint, ...]
    generators: tuple[Any, ...] = field(default=())
    continuous: bool = False

    def __post_init__(self) -> None:
        pts = tuple(self.points)
        gens = tuple(self.generators) if self.generators else tuple(range(len(pts)))
        if len(gens) != len(pts):
            raise ValueError("one generator per frontier point is required")
        for a, b in zip(pts, pts[1:]):
            if b.reporting_rate <= a.reporting_rate:
                raise ValueError("frontier reporting rates must be strictly increasing")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "generators", gens)

    def __len__(self) -> int:
        return len(self.points)

    def rates(self) -> np.ndarray:
        return np.array([p.reporting_rate for p in self.points])

    def qbers(self) -> np.ndarray:
        return np.array([p.qber for p in self.points])


def _pixel_errors(lattice: BasisLattice, measurement: BlochAngles) -> np.ndarray:
    return error_probabilities(lattice.thetas(), lattice.phis(), measurement)


def evaluate_partition(
    lattice: BasisLattice,
    partition: StrategyPartition,
    measurement: BlochAngles = NORTH_POLE,
) -> RQPoint:
    """Exact (R1, Q1) of a partition when the adversary measures along ``measurement``."""
    if len(partition) != lattice.k_count:
        raise ValueError(
            f"partition has {len(partition)} actions but the lattice has {lattice.k_count} pixels"
        )
    p = _pixel_errors(lattice, measurement)
    report = partition.indices(Action.REPORT)
    flip = partition.indices(Action.FLIP)
    n_reported = len(report) + len(flip)
    if n_reported == 0:
        return RQPoint(0.0, 0.0)
    errors = p[report].sum() + (1.0 - p[flip]).sum()
    return RQPoint(n_reported / lattice.k_count, errors / n_reported)


def _threshold_rings(n_rings: int, m0: int) -> tuple[list[int], list[int]]:
    report = [m for m in range(n_rings + 1) if m <= m0]
    # For even N and m0 = N/2 the equator would sit in both sets; it is
    # reported once (its error is 1/2 either way).
    flip = [m for m in range(n_rings + 1) if m >= n_rings - m0 and m > m0]
    return report, flip


def threshold_partition(lattice: BasisLattice, m0: int) -> StrategyPartition:
    """Report rings ``m <= m0``, flip rings ``m >= N - m0``, stay silent elsewhere."""
    if not 0 <= m0 <= lattice.n_rings // 2:
        raise ValueError(f"m0 must lie in [0, {lattice.n_rings // 2}], got {m0}")
    report, flip = _threshold_rings(lattice.n_rings, m0)
    report_set, flip_set = set(report), set(flip)
    actions = []
    for m, _ in lattice.indices:
        if m in report_set:
            actions.append(Action.REPORT)
        elif m in flip_set:
            actions.append(Action.FLIP)
        else:
            actions.append(Action.SILENT)
    return StrategyPartition(tuple(actions))


def threshold_point(n_rings: int, m0: int) -> RQPoint:
    """Frontier point of the ``m0`` threshold strategy, from exact ring sizes."""
    sizes = [ring_size(n_rings, m) for m in range(n_rings + 1)]
    k = sum(sizes)
    report, flip = _threshold_rings(n_rings, m0)
    n_reported = sum(sizes[m] for m in report) + sum(sizes[m] for m in flip)
    errors = sum(sizes[m] * math.sin(m * math.pi / (2 * n_rings)) ** 2 for m in report)
    errors += sum(sizes[m] * math.sin((n_rings - m) * math.pi / (2 * n_rings)) ** 2 for m in flip)
    return RQPoint(n_reported / k, errors / n_reported)


def optimal_frontier(n_rings: int) -> StrategyFrontier:
    """Optimal strategies for a lattice of ``n_rings`` = N, one per ``m0 = 0..N//2``."""
    if isinstance(n_rings, bool) or int(n_rings) != n_rings or n_rings < 1:
        raise ValueError(f"N must be a positive integer, got {n_rings!r}")
    points: list[RQPoint] = []
    gens: list[int] = []
    for m0 in range(n_rings // 2 + 1):
        pt = threshold_point(n_rings, m0)
        if points and abs(pt.reporting_rate - points[-1].reporting_rate) <= TOL:
            continue
        points.append(pt)
        gens.append(m0)
    return StrategyFrontier(tuple(points), tuple(gens))


def approximate_threshold_point(n_rings: int, m0: int) -> tuple[float, float]:
    """Large-N continuum approximations of the threshold point (diagnostic).

    Uses the area-based K, so R1 can exceed one near ``m0 = N/2``.
    """
    n = n_rings
    k = build_lattice(n).closed_form_count
    a = math.sin(m0 * math.pi / (2 * n))
    b = math.sin((m0 + 1) * math.pi / (2 * n))
    rate = 2 * (m0 + 1) / k + 2 * a * b
    num = (2 * m0 + 1) / 4 + 2 * n * n / math.pi * a**2 * b**2 - n / (
        2 * math.pi
    ) * math.sin((2 * m0 + 1) * math.pi / (2 * n))
    den = m0 + 1 + 4 * n * n / math.pi * a * b
    return rate, num / den


def asymptotic_point(theta0: float) -> RQPoint:
    """Continuous-basis strategy: report for theta < Theta0, flip for theta > pi - Theta0."""
    if not (0.0 <= theta0 <= math.pi / 2 + TOL):
        raise ValueError(f"Theta0 must lie in [0, pi/2], got {theta0}")
    rate = 2.0 * math.sin(min(theta0, math.pi / 2) / 2.0) ** 2
    return RQPoint(rate, rate / 4.0)


def asymptotic_theta0(rate: float) -> float:
    """Inverse of ``asymptotic_point`` in the reporting rate."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must lie in [0, 1], got {rate}")
    return 2.0 * math.asin(math.sqrt(rate / 2.0))


def asymptotic_frontier(n_points: int = 91) -> StrategyFrontier:
    """Samples of the continuous frontier on an even Theta0 grid over (0, pi/2]."""
    if n_points < 2:
        raise ValueError("need at least two points")
    thetas = np.linspace(0.0, math.pi / 2, n_points)[1:]
    pts = tuple(asymptotic_point(float(t)) for t in thetas)
    return StrategyFrontier(pts, tuple(float(t) for t in thetas), continuous=True)


def max_rate_at_qber(frontier: StrategyFrontier, qber_budget: float) -> float:
    """Largest reporting rate reachable with QBER at most ``qber_budget``.

    Between listed points the adversary randomises over two strategies, which
    moves linearly in the (R1, R1*Q1) plane.  A continuous frontier is inverted
    exactly.
    """
    if not 0.0 <= qber_budget <= 0.5:
        raise ValueError(f"qber budget must lie in [0, 1/2], got {qber_budget}")
    if frontier.continuous:
        return min(4.0 * qber_budget, 1.0)
    if not frontier.points:
        raise ValueError("empty frontier")
    pts = frontier.points
    if pts[0].qber > qber_budget + TOL:
        # Only silence keeps the QBER that low.
        return 0.0
    best = pts[0].reporting_rate
    for a, b in zip(pts, pts[1:]):
        if b.qber <= qber_budget + TOL:
            best = b.reporting_rate
            continue
        d_rate = b.reporting_rate - a.reporting_rate
        d_err = b.error_mass - a.error_mass
        t = (qber_budget * a.reporting_rate - a.error_mass) / (d_err - qber_budget * d_rate)
        return a.reporting_rate + min(max(t, 0.0), 1.0) * d_rate
    return best


def mixture_for_rate(frontier: StrategyFrontier, rate: float) -> tuple[int, int, float]:
    """Pick adjacent frontier points ``(i, j)`` and weight ``p`` on ``j`` so that
    mixing them gives reporting rate ``rate``.  Rates below the first point
    are reached by mixing point 0 with silence (``i == -1``).
    """
    if frontier.continuous:
        raise ValueError("continuous frontiers need no mixing")
    rates = frontier.rates()
    if not 0.0 <= rate <= rates[-1] + TOL:
        raise ValueError(f"rate {rate} outside [0, {rates[-1]}]")
    if rate <= rates[0]:
        return -1, 0, rate / rates[0]
    j = int(np.searchsorted(rates, rate - TOL))
    j = min(j, len(rates) - 1)
    if abs(rates[j] - rate) <= TOL:
        return j, j, 1.0
    i = j - 1
    return i, j, (rate - rates[i]) / (rates[j] - rates[i])


def two_basis_attack() -> RQPoint:
    """Intercept-resend against two bases: guess right half the time, never err."""
    return RQPoint(0.5, 0.0)


# -- exhaustive oracle ---------------------------------------------------------


def enumerate_ring_strategies(n_rings: int) -> list[tuple[tuple[tuple[int, int], ...], RQPoint]]:
    """Every strategy up to within-ring relabelling, for a pole-aligned measurement.

    Pixels on one ring share the same error probability, so a strategy is fully
    described by how many pixels of each ring are reported and how many flipped.
    Returns ``(per-ring (report, flip) counts, point)`` pairs.
    """
    if n_rings > BRUTE_FORCE_MAX_N:
        raise ValueError(
            f"exhaustive enumeration is limited to N <= {BRUTE_FORCE_MAX_N}, got {n_rings}"
        )
    lattice = build_lattice(n_rings)
    sizes = lattice.ring_sizes
    k = lattice.k_count
    # per-pixel error when reporting / flipping on each ring, measured at the pole
    p_report = [error_probability(BlochAngles(t), NORTH_POLE) for t in lattice.ring_thetas]
    choices = [
        [(r, f) for r in range(c + 1) for f in range(c + 1 - r)] for c in sizes
    ]
    out = []
    for combo in itertools.product(*choices):
        n_rep = sum(r + f for r, f in combo)
        if n_rep == 0:
            out.append((combo, RQPoint(0.0, 0.0)))
            continue
        err = sum(r * p + f * (1.0 - p) for (r, f), p in zip(combo, p_report))
        out.append((combo, RQPoint(n_rep / k, err / n_rep)))
    return out


def dominates(a: RQPoint, b: RQPoint, tol: float = TOL) -> bool:
    """True if ``a`` is at least as good as ``b`` in both coordinates and strictly better in one."""
    no_worse = a.reporting_rate >= b.reporting_rate - tol and a.qber <= b.qber + tol
    better = a.reporting_rate > b.reporting_rate + tol or a.qber < b.qber - tol
    return no_worse and better


def pareto_filter(entries: Sequence[tuple[Any, RQPoint]]) -> list[tuple[Any, RQPoint]]:
    """Non-dominated entries, sorted by rate, ties collapsed onto the smallest generator."""
    best: dict[float, tuple[Any, RQPoint]] = {}
    # minimal qber per distinct rate first
    for gen, pt in sorted(
        entries, key=lambda e: (e[1].reporting_rate, round(e[1].qber, 12), e[0])
    ):
        key = round(pt.reporting_rate, 12)
        if key not in best:
            best[key] = (gen, pt)
    front: list[tuple[Any, RQPoint]] = []
    min_q_right = math.inf
    for gen, pt in sorted(best.values(), key=lambda e: -e[1].reporting_rate):
        if pt.qber < min_q_right - TOL:
            front.append((gen, pt))
            min_q_right = pt.qber
    front.reverse()
    return front


def mixing_vertices(front: Sequence[tuple[Any, RQPoint]]) -> list[tuple[Any, RQPoint]]:
    """Drop points that lie on the segment between their neighbours in the
    (R1, R1*Q1) plane, i.e. that a two-strategy mixture already achieves."""
    verts: list[tuple[Any, RQPoint]] = []
    for entry in front:
        while len(verts) >= 2:
            (_, a), (_, b) = verts[-2], verts[-1]
            c = entry[1]
            cross = (b.reporting_rate - a.reporting_rate) * (c.error_mass - a.error_mass) - (
                b.error_mass - a.error_mass
            ) * (c.reporting_rate - a.reporting_rate)
            if cross <= TOL:
                verts.pop()
            else:
                break
        verts.append(entry)
    return verts


def brute_force_frontier(n_rings: int) -> StrategyFrontier:
    """Pareto frontier over all strategies by exhaustive enumeration (N <= 3).

    Only strategies that are not mixtures of two others are kept, so the result
    is directly comparable with ``optimal_frontier``.  Generators are the
    per-ring (report, flip) counts.
    """
    front = mixing_vertices(pareto_filter(enumerate_ring_strategies(n_rings)))
    return StrategyFrontier(tuple(p for _, p in front), tuple(g for g, _ in front))


def write_frontier_csv(frontier: StrategyFrontier, fh: IO[str]) -> None:
    """CSV with columns m0, R1, Q1."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["m0", "R1", "Q1"])
    for gen, pt in zip(frontier.generators, frontier.points):
        label = format(gen, ".12g") if isinstance(gen, float) else gen
        writer.writerow([label, format(pt.reporting_rate, ".12g"), format(pt.qber, ".12g")])
