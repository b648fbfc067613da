"""One-dimensional spacetime harness for position-verification rounds.

Actors sit on a line and exchange messages at unit speed.  V0 sends the
quantum state, V1 sends the basis, timed to reach the claimed position
together.  An honest prover answers both verifiers at once; an adversary pair
E0/E1 intercepts the two messages and relays classical information between
themselves before answering.

Quantum states travel symbolically.  Per-round randomness (encoded bit, basis,
photon number, detection, the adversary's outcome and action) is drawn for all
rounds at once; arrival times come from replaying the message schedule in an
event queue.  Times depend only on whether a round is reported, so a session
replays one schedule per (reported, bit) branch and reuses it.
"""
from __future__ import annotations

import csv
import heapq
import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import IO, Any, Callable, Mapping

import numpy as np

from .bloch import BlochAngles, build_lattice, pairwise_error_probabilities
from .decoy import ChannelModel, ObservedStats, honest_stats, required_single_photon_rate
from .dv_strategy import asymptotic_theta0, mixture_for_rate, optimal_frontier

ROLES = ("V0", "E0", "P", "E1", "V1")
MESSAGE_KINDS = ("quantum_state", "basis_info", "report", "internal_forward")
ADVERSARY_KINDS = ("bb84", "lattice", "wcp_pns", "memory_wait")
MEMORY_VARIANTS = ("store", "forward", "roundtrip")
_RING_EPS = 1e-9


class ConfigError(ValueError):
    """Invalid scenario configuration; ``key`` points at the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key
        self.reason = message


# -- geometry and messages -----------------------------------------------------


@dataclass(frozen=True)
class Actor:
    role: str
    position: float


@dataclass(frozen=True)
class Geometry:
    """Positions on the line.  With adversaries present the order must be
    V0 < E0 < P < E1 < V1; otherwise V0 < P < V1."""

    positions: Mapping[str, float]

    def __post_init__(self) -> None:
        pos = dict(self.positions)
        unknown = set(pos) - set(ROLES)
        if unknown:
            raise ValueError(f"unknown roles {sorted(unknown)}")
        for role in ("V0", "P", "V1"):
            if role not in pos:
                raise ValueError(f"missing position for {role}")
        order = [r for r in ROLES if r in pos]
        if ("E0" in pos) != ("E1" in pos):
            raise ValueError("E0 and E1 must both be placed or both be absent")
        for a, b in zip(order, order[1:]):
            if not pos[a] < pos[b]:
                raise ValueError(f"need {a} < {b}, got {pos[a]} and {pos[b]}")
        object.__setattr__(self, "positions", pos)

    @property
    def has_adversaries(self) -> bool:
        return "E0" in self.positions

    def actors(self) -> list[Actor]:
        return [Actor(r, self.positions[r]) for r in ROLES if r in self.positions]

    def distance(self, a: str, b: str) -> float:
        return abs(self.positions[a] - self.positions[b])


@dataclass(frozen=True)
class Message:
    kind: str
    src: str
    dst: str
    emit_time: float
    arrival_time: float
    payload: Mapping[str, Any] = field(default_factory=dict)


class EventQueue:
    """Messages ordered by (arrival time, emission sequence number)."""

    def __init__(self, geometry: Geometry):
        self.geometry = geometry
        self.now: float = -math.inf
        self._heap: list[tuple[float, int, Message]] = []
        self._seq = itertools.count()
        self.log: list[Message] = []

    def send(self, kind: str, src: str, dst: str, emit_time: float, **payload: Any) -> Message:
        if kind not in MESSAGE_KINDS:
            raise ValueError(f"unknown message kind {kind!r}")
        if emit_time < self.now:
            raise RuntimeError(f"{src} cannot emit at {emit_time} before now={self.now}")
        msg = Message(kind, src, dst, emit_time, emit_time + self.geometry.distance(src, dst), payload)
        heapq.heappush(self._heap, (msg.arrival_time, next(self._seq), msg))
        return msg

    def __bool__(self) -> bool:
        return bool(self._heap)

    def pop(self) -> Message:
        time, _, msg = heapq.heappop(self._heap)
        if time < self.now:
            raise RuntimeError("causality violated")
        self.now = time
        self.log.append(msg)
        return msg


@dataclass(frozen=True)
class Report:
    bit: int
    arrival_time: float


@dataclass(frozen=True)
class RoundOutcome:
    report_v0: Report | None
    report_v1: Report | None
    x: int
    basis: BlochAngles
    emit_times: Mapping[str, float]
    verifier_positions: Mapping[str, float]
    messages: tuple[Message, ...] = ()

    def report(self, verifier: str) -> Report | None:
        return self.report_v0 if verifier == "V0" else self.report_v1


def timing_lateness(outcome: RoundOutcome, claimed_position: float) -> dict[str, float]:
    """Arrival time minus the time expected from a prover at ``claimed_position``."""
    late = {}
    for v in ("V0", "V1"):
        rep = outcome.report(v)
        if rep is not None:
            expected = outcome.emit_times[v] + 2 * abs(outcome.verifier_positions[v] - claimed_position)
            late[v] = rep.arrival_time - expected
    return late


def verify_timing(outcome: RoundOutcome, claimed_position: float, tolerance: float = 0.0) -> bool:
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    return all(abs(d) <= tolerance for d in timing_lateness(outcome, claimed_position).values())


def cross_check(outcome: RoundOutcome) -> bool:
    a, b = outcome.report_v0, outcome.report_v1
    if a is None and b is None:
        return True
    return a is not None and b is not None and a.bit == b.bit


# -- scenario ------------------------------------------------------------------


@dataclass(frozen=True)
class Source:
    kind: str = "single_photon"
    mu: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("single_photon", "wcp"):
            raise ValueError(f"unknown source type {self.kind!r}")
        if self.kind == "wcp" and (self.mu is None or not self.mu > 0):
            raise ValueError("a weak coherent source needs mu > 0")


@dataclass(frozen=True)
class Adversary:
    """Adversary configuration.

    ``lattice``: threshold strategy ``m0`` on an ``n_rings`` lattice, or a
    mixture of frontier strategies hitting ``target_rate``.  ``measurement`` is
    ``"pole"`` or ``"random_pixel"``.
    ``wcp_pns``: photon-number attack with single-photon rate ``r1``
    (``None`` = chosen to match the honest rate).
    ``memory_wait``: the adversary measures in the right basis after waiting,
    either holding the state at E0 (``"store"``), sending it on to E1
    (``"forward"``), or holding it at E0 until the basis arrives and then
    sending it to E1 (``"roundtrip"``).
    """

    kind: str
    n_rings: int | None = None
    m0: int | None = None
    target_rate: float | None = None
    measurement: str = "pole"
    r1: float | None = None
    variant: str = "store"

    def __post_init__(self) -> None:
        if self.kind not in ADVERSARY_KINDS:
            raise ValueError(f"unknown adversary type {self.kind!r}")
        if self.kind == "lattice":
            if self.n_rings is None or self.n_rings < 1:
                raise ValueError("lattice adversary needs N >= 1")
            if (self.m0 is None) == (self.target_rate is None):
                raise ValueError("lattice adversary needs exactly one of m0 or target_rate")
            if self.m0 is not None and not 0 <= self.m0 <= self.n_rings // 2:
                raise ValueError(f"m0 must lie in [0, {self.n_rings // 2}]")
            if self.measurement not in ("pole", "random_pixel"):
                raise ValueError(f"unknown measurement {self.measurement!r}")
        if self.r1 is not None and not 0.0 <= self.r1 <= 1.0:
            raise ValueError("r1 must lie in [0, 1]")
        if self.variant not in MEMORY_VARIANTS:
            raise ValueError(f"unknown memory_wait variant {self.variant!r}")


@dataclass(frozen=True)
class Scenario:
    geometry: Geometry
    channel: ChannelModel
    source: Source = Source()
    adversary: Adversary | None = None

    def __post_init__(self) -> None:
        if self.adversary is not None and not self.geometry.has_adversaries:
            raise ValueError("adversary scenarios need E0 and E1 positions")
        if self.adversary is not None and self.adversary.kind == "wcp_pns" and self.source.kind != "wcp":
            raise ValueError("the photon-number attack needs a weak coherent source")

    @property
    def basis_family(self) -> str:
        if self.adversary is not None and self.adversary.kind in ("bb84", "lattice"):
            return self.adversary.kind
        return "continuous"


def expected_honest_stats(scenario: Scenario) -> ObservedStats:
    """Statistics the verifiers expect from an honest prover on this channel."""
    ch = scenario.channel
    if scenario.source.kind == "wcp":
        return honest_stats(ch, scenario.source.mu)
    rate = ch.eta + (1.0 - ch.eta) * ch.y0
    if rate == 0.0:
        return ObservedStats(0.0, 0.0, degenerate=True)
    return ObservedStats(rate, (ch.eta * ch.e_det + 0.5 * (1.0 - ch.eta) * ch.y0) / rate)


# -- randomness ----------------------------------------------------------------


@dataclass
class RoundDraws:
    x: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    reported: np.ndarray
    bit: np.ndarray

    def __len__(self) -> int:
        return len(self.x)


def _draw_bases(scenario: Scenario, n: int, rng: np.random.Generator):
    family = scenario.basis_family
    if family == "bb84":
        idx = rng.integers(0, 2, n)
        return idx * (math.pi / 2), np.zeros(n), idx
    if family == "lattice":
        lattice = build_lattice(scenario.adversary.n_rings)
        idx = rng.integers(0, lattice.k_count, n)
        return lattice.thetas()[idx], lattice.phis()[idx], idx
    theta = np.arccos(rng.uniform(-1.0, 1.0, n))
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    return theta, phi, None


def _honest_detection(scenario: Scenario, x, n, rng):
    ch = scenario.channel
    if scenario.source.kind == "wcp":
        photons = rng.poisson(scenario.source.mu, n)
    else:
        photons = np.ones(n, dtype=int)
    detected = rng.binomial(photons, ch.eta) > 0
    dark = rng.random(n) < ch.y0
    signal_bit = x ^ (rng.random(n) < ch.e_det)
    dark_bit = rng.integers(0, 2, n)
    bit = np.where(detected, signal_bit, dark_bit)
    return detected | dark, bit


def _lattice_actions(adv: Adversary, n: int, rng: np.random.Generator) -> np.ndarray:
    """Threshold m0 used in each round (-1 = silent), mixing if a target rate is set."""
    if adv.m0 is not None:
        return np.full(n, adv.m0)
    frontier = optimal_frontier(adv.n_rings)
    i, j, p = mixture_for_rate(frontier, adv.target_rate)
    gens = list(frontier.generators)
    lo = -1 if i < 0 else gens[i]
    return np.where(rng.random(n) < p, gens[j], lo)


def draw_rounds(scenario: Scenario, n: int, rng: np.random.Generator) -> RoundDraws:
    """Sample every random quantity of ``n`` rounds."""
    x = rng.integers(0, 2, n)
    theta, phi, idx = _draw_bases(scenario, n, rng)
    adv = scenario.adversary

    if adv is None or adv.kind == "memory_wait":
        # a memory-assisted adversary measures in the right basis, so its
        # statistics are those of the honest prover
        reported, bit = _honest_detection(scenario, x, n, rng)

    elif adv.kind == "bb84":
        guess = rng.integers(0, 2, n)
        reported, bit = guess == idx, x.copy()

    elif adv.kind == "lattice":
        if adv.measurement == "pole":
            m_theta, m_phi = np.zeros(n), np.zeros(n)
        else:
            lattice = build_lattice(adv.n_rings)
            pick = rng.integers(0, lattice.k_count, n)
            m_theta, m_phi = lattice.thetas()[pick], lattice.phis()[pick]
        p_err = pairwise_error_probabilities(theta, phi, m_theta, m_phi)
        x_e = x ^ (rng.random(n) < p_err)
        # angular distance to the measurement axis, in units of the ring spacing
        ring = 2.0 * np.arcsin(np.sqrt(p_err)) * adv.n_rings / math.pi
        m0 = _lattice_actions(adv, n, rng)
        report = ring <= m0 + _RING_EPS
        flip = (ring >= adv.n_rings - m0 - _RING_EPS) & ~report & (m0 >= 0)
        reported, bit = report | flip, np.where(flip, 1 - x_e, x_e)

    else:  # wcp_pns
        mu = scenario.source.mu
        need = required_single_photon_rate(scenario.channel, mu)
        r1 = adv.r1 if adv.r1 is not None else min(max(need, 0.0), 1.0)
        p1 = mu * math.exp(-mu)
        multi = -math.expm1(-mu) - p1
        multi_report = 1.0
        if adv.r1 is None and need < 0.0:
            multi_report = expected_honest_stats(scenario).rate / multi
        theta0 = asymptotic_theta0(r1)
        photons = rng.poisson(mu, n)
        # E0 measures single photons along the pole
        x_e = x ^ (rng.random(n) < np.sin(theta / 2.0) ** 2)
        report1 = (photons == 1) & (theta < theta0)
        flip1 = (photons == 1) & (theta > math.pi - theta0)
        many = (photons > 1) & (rng.random(n) < multi_report)
        reported = report1 | flip1 | many
        bit = np.where(many, x, np.where(flip1, 1 - x_e, x_e))

    return RoundDraws(x, theta, phi, np.asarray(reported, bool), np.asarray(bit, int) % 2)


# -- message schedule ----------------------------------------------------------

Behaviour = Callable[[EventQueue, Message, dict], None]


def _honest_behaviour(reported: bool, bit: int) -> dict[str, Behaviour]:
    def prover(q: EventQueue, msg: Message, mem: dict) -> None:
        mem[msg.kind] = msg
        if "quantum_state" in mem and "basis_info" in mem and reported:
            q.send("report", "P", "V0", q.now, bit=bit)
            q.send("report", "P", "V1", q.now, bit=bit)

    return {"P": prover}


def _intercept_behaviour(reported: bool, bit: int) -> dict[str, Behaviour]:
    """E0 measures on arrival and forwards its outcome; E1 forwards the basis."""

    def e0(q: EventQueue, msg: Message, mem: dict) -> None:
        if msg.kind == "quantum_state":
            mem["measured"] = True
            q.send("internal_forward", "E0", "E1", q.now, outcome=bit)
        elif msg.kind == "internal_forward":
            mem["basis"] = True
        if mem.get("measured") and mem.get("basis") and reported:
            q.send("report", "E0", "V0", q.now, bit=bit)

    def e1(q: EventQueue, msg: Message, mem: dict) -> None:
        if msg.kind == "basis_info":
            mem["basis"] = True
            q.send("internal_forward", "E1", "E0", q.now, basis=True)
        elif msg.kind == "internal_forward":
            mem["outcome"] = msg.payload["outcome"]
        if mem.get("basis") and "outcome" in mem and reported:
            q.send("report", "E1", "V1", q.now, bit=mem["outcome"])

    return {"E0": e0, "E1": e1}


def _store_behaviour(reported: bool, bit: int) -> dict[str, Behaviour]:
    """E0 keeps the state until the basis arrives, then measures."""

    def e0(q: EventQueue, msg: Message, mem: dict) -> None:
        mem[msg.kind] = True
        if mem.get("quantum_state") and mem.get("internal_forward") and not mem.get("done"):
            mem["done"] = True
            if reported:
                q.send("report", "E0", "V0", q.now, bit=bit)
            q.send("internal_forward", "E0", "E1", q.now, outcome=bit)

    def e1(q: EventQueue, msg: Message, mem: dict) -> None:
        if msg.kind == "basis_info":
            q.send("internal_forward", "E1", "E0", q.now, basis=True)
        elif msg.kind == "internal_forward" and reported:
            q.send("report", "E1", "V1", q.now, bit=msg.payload["outcome"])

    return {"E0": e0, "E1": e1}


def _forward_behaviour(reported: bool, bit: int) -> dict[str, Behaviour]:
    """E0 passes the state on to E1, who measures once it holds the basis."""

    def e0(q: EventQueue, msg: Message, mem: dict) -> None:
        if msg.kind == "quantum_state":
            q.send("quantum_state", "E0", "E1", q.now)
        elif msg.kind == "internal_forward" and reported:
            q.send("report", "E0", "V0", q.now, bit=msg.payload["outcome"])

    def e1(q: EventQueue, msg: Message, mem: dict) -> None:
        mem[msg.kind] = True
        if mem.get("quantum_state") and mem.get("basis_info") and not mem.get("done"):
            mem["done"] = True
            if reported:
                q.send("report", "E1", "V1", q.now, bit=bit)
            q.send("internal_forward", "E1", "E0", q.now, outcome=bit)

    return {"E0": e0, "E1": e1}


def _roundtrip_behaviour(reported: bool, bit: int) -> dict[str, Behaviour]:
    """E0 holds the state until the basis arrives, then ships it to E1, which
    measures and sends the outcome back."""

    def e0(q: EventQueue, msg: Message, mem: dict) -> None:
        mem[msg.kind] = True
        if msg.kind == "internal_forward" and "outcome" in msg.payload:
            if reported:
                q.send("report", "E0", "V0", q.now, bit=msg.payload["outcome"])
        elif mem.get("quantum_state") and mem.get("internal_forward") and not mem.get("sent"):
            mem["sent"] = True
            q.send("quantum_state", "E0", "E1", q.now)

    def e1(q: EventQueue, msg: Message, mem: dict) -> None:
        if msg.kind == "basis_info":
            q.send("internal_forward", "E1", "E0", q.now, basis=True)
        elif msg.kind == "quantum_state":
            if reported:
                q.send("report", "E1", "V1", q.now, bit=bit)
            q.send("internal_forward", "E1", "E0", q.now, outcome=bit)

    return {"E0": e0, "E1": e1}


_MEMORY_BEHAVIOURS = {
    "store": _store_behaviour,
    "forward": _forward_behaviour,
    "roundtrip": _roundtrip_behaviour,
}


def emission_times(geometry: Geometry) -> dict[str, float]:
    """V0 emits at 0; V1 emits so that both signals reach P simultaneously."""
    return {"V0": 0, "V1": geometry.distance("V0", "P") - geometry.distance("V1", "P")}


def play_schedule(scenario: Scenario, reported: bool, bit: int, x: int = 0,
                  basis: BlochAngles = BlochAngles(0.0)) -> RoundOutcome:
    """Run one round's messages through the event queue."""
    geo = scenario.geometry
    adv = scenario.adversary
    if adv is None:
        behaviour, first_hop = _honest_behaviour(reported, bit), ("P", "P")
    elif adv.kind == "memory_wait":
        make = _MEMORY_BEHAVIOURS[adv.variant]
        behaviour, first_hop = make(reported, bit), ("E0", "E1")
    else:
        behaviour, first_hop = _intercept_behaviour(reported, bit), ("E0", "E1")

    q = EventQueue(geo)
    emit = emission_times(geo)
    q.send("quantum_state", "V0", first_hop[0], emit["V0"])
    q.send("basis_info", "V1", first_hop[1], emit["V1"])
    memory: dict[str, dict] = {role: {} for role in ROLES}
    reports: dict[str, Report] = {}
    while q:
        msg = q.pop()
        if msg.dst in ("V0", "V1"):
            if msg.kind == "report" and msg.dst not in reports:
                reports[msg.dst] = Report(int(msg.payload["bit"]), msg.arrival_time)
            continue
        behaviour[msg.dst](q, msg, memory[msg.dst])
    return RoundOutcome(
        reports.get("V0"),
        reports.get("V1"),
        int(x),
        basis,
        emit,
        {"V0": geo.positions["V0"], "V1": geo.positions["V1"]},
        tuple(q.log),
    )


def run_round(scenario: Scenario, rng: np.random.Generator) -> RoundOutcome:
    d = draw_rounds(scenario, 1, rng)
    return play_schedule(
        scenario, bool(d.reported[0]), int(d.bit[0]), int(d.x[0]),
        BlochAngles(float(d.theta[0]), float(d.phi[0])),
    )


# -- sessions ------------------------------------------------------------------


@dataclass(frozen=True)
class AcceptanceConfig:
    """``z`` sets the two-sided reporting-rate band; ``qber_budget`` defaults to
    the expected honest QBER plus three binomial standard errors."""

    z: float = 5.0
    qber_budget: float | None = None
    timing_tolerance: float = 0.0

    def __post_init__(self) -> None:
        if self.z <= 0:
            raise ValueError("z must be positive")
        if self.qber_budget is not None and not 0.0 <= self.qber_budget <= 1.0:
            raise ValueError("qber_budget must lie in [0, 1]")
        if self.timing_tolerance < 0:
            raise ValueError("timing tolerance must be non-negative")


@dataclass
class SessionStats:
    n_rounds: int
    n_reported: int
    reporting_rate: float
    qber: float
    timing_ok: float
    consistency_ok: float
    expected_rate: float
    expected_qber: float
    rate_band: float
    qber_budget: float
    verdict: str

    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SessionResult:
    stats: SessionStats
    draws: RoundDraws
    templates: dict[tuple[bool, int], RoundOutcome]


def run_session(
    scenario: Scenario,
    n_rounds: int,
    acceptance: AcceptanceConfig = AcceptanceConfig(),
    rng: np.random.Generator | int | None = None,
) -> SessionResult:
    """Run ``n_rounds`` rounds and apply the verifiers' acceptance test.

    Accept iff every report is on time, V0 and V1 always agree, the observed
    reporting rate lies within ``z`` binomial standard errors of the expected
    honest rate, and the observed QBER does not exceed the budget.
    """
    if n_rounds < 1:
        raise ValueError("need at least one round")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    draws = draw_rounds(scenario, n_rounds, rng)
    claimed = scenario.geometry.positions["P"]

    templates: dict[tuple[bool, int], RoundOutcome] = {}
    timing = np.ones(n_rounds, bool)
    consistent = np.ones(n_rounds, bool)
    v0_bit = np.full(n_rounds, -1)
    for reported in (False, True):
        for bit in (0, 1):
            mask = (draws.reported == reported) & (draws.bit == bit)
            if not mask.any():
                continue
            t = play_schedule(scenario, reported, bit)
            templates[(reported, bit)] = t
            timing[mask] = verify_timing(t, claimed, acceptance.timing_tolerance)
            consistent[mask] = cross_check(t)
            if t.report_v0 is not None:
                v0_bit[mask] = t.report_v0.bit

    has_report = v0_bit >= 0
    n_rep = int(has_report.sum())
    rate = n_rep / n_rounds
    qber = float((v0_bit[has_report] != draws.x[has_report]).mean()) if n_rep else 0.0
    timing_ok = float(timing[has_report].mean()) if n_rep else 1.0
    consistency_ok = float(consistent.mean())

    expected = expected_honest_stats(scenario)
    band = acceptance.z * math.sqrt(expected.rate * (1.0 - expected.rate) / n_rounds)
    budget = acceptance.qber_budget
    if budget is None:
        n_exp = max(expected.rate * n_rounds, 1.0)
        budget = expected.qber + 3.0 * math.sqrt(expected.qber * (1.0 - expected.qber) / n_exp)
    accept = (
        timing_ok == 1.0
        and consistency_ok == 1.0
        and abs(rate - expected.rate) <= band
        and qber <= budget
    )
    stats = SessionStats(
        n_rounds, n_rep, rate, qber, timing_ok, consistency_ok,
        expected.rate, expected.qber, band, budget,
        "accept" if accept else "reject",
    )
    return SessionResult(stats, draws, templates)


def write_rounds_csv(result: SessionResult, fh: IO[str]) -> None:
    """Per-round CSV: index, truth, and what each verifier received."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["round", "x", "theta", "phi", "bit_v0", "time_v0", "bit_v1", "time_v1"])
    d = result.draws
    for i in range(len(d)):
        t = result.templates[(bool(d.reported[i]), int(d.bit[i]))]
        cells = []
        for rep in (t.report_v0, t.report_v1):
            cells += ["", ""] if rep is None else [rep.bit, format(rep.arrival_time, ".12g")]
        writer.writerow([i, int(d.x[i]), format(d.theta[i], ".12g"), format(d.phi[i], ".12g"), *cells])


# -- configuration -------------------------------------------------------------

DEFAULT_POSITIONS = {"V0": -10.0, "E0": -5.0, "P": 0.0, "E1": 5.0, "V1": 10.0}
_TOP_KEYS = {"geometry", "channel", "source", "adversary", "rounds", "seed", "acceptance"}


def _check_keys(obj: Any, allowed: set[str], where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(where, "expected an object")
    for k in obj:
        if k not in allowed:
            raise ConfigError(f"{where}.{k}" if where else k, "unknown key")
    return obj


def _num(obj: dict, key: str, where: str, default=None, kind=float):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{where}.{key}", "required")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}.{key}", f"expected a number, got {val!r}")
    if kind is int and int(val) != val:
        raise ConfigError(f"{where}.{key}", f"expected an integer, got {val!r}")
    return kind(val)


def parse_config(cfg: Any) -> tuple[Scenario, int, int, AcceptanceConfig]:
    """Build (scenario, rounds, seed, acceptance) from a JSON-style mapping."""
    cfg = _check_keys(cfg, _TOP_KEYS, "")
    adv_cfg = cfg.get("adversary")

    geo_cfg = _check_keys(cfg.get("geometry", {}), {"positions"}, "geometry")
    if "positions" in geo_cfg:
        pos_cfg = _check_keys(geo_cfg["positions"], set(ROLES), "geometry.positions")
        positions = {k: _num(pos_cfg, k, "geometry.positions") for k in pos_cfg}
    else:
        keep = ROLES if adv_cfg else ("V0", "P", "V1")
        positions = {k: DEFAULT_POSITIONS[k] for k in keep}

    ch_cfg = _check_keys(cfg.get("channel"), {"eta", "y0", "e_det"}, "channel")
    src_cfg = _check_keys(cfg.get("source", {"type": "single_photon"}), {"type", "mu"}, "source")
    acc_cfg = _check_keys(cfg.get("acceptance", {}), {"z", "qber_budget", "timing_tolerance"}, "acceptance")

    try:
        geometry = Geometry(positions)
    except ValueError as exc:
        raise ConfigError("geometry.positions", str(exc)) from None
    try:
        channel = ChannelModel(
            eta=_num(ch_cfg, "eta", "channel"),
            y0=_num(ch_cfg, "y0", "channel", 0.0),
            e_det=_num(ch_cfg, "e_det", "channel", 0.0),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("channel", str(exc)) from None
    try:
        mu = _num(src_cfg, "mu", "source", 0.0) if "mu" in src_cfg else None
        source = Source(src_cfg.get("type", "single_photon"), mu)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("source", str(exc)) from None

    adversary = None
    if adv_cfg is not None:
        adv_cfg = _check_keys(
            adv_cfg, {"type", "N", "m0", "target_rate", "measurement", "r1", "variant"}, "adversary"
        )
        if "type" not in adv_cfg:
            raise ConfigError("adversary.type", "required")
        try:
            adversary = Adversary(
                kind=adv_cfg["type"],
                n_rings=_num(adv_cfg, "N", "adversary", kind=int) if "N" in adv_cfg else None,
                m0=_num(adv_cfg, "m0", "adversary", kind=int) if "m0" in adv_cfg else None,
                target_rate=_num(adv_cfg, "target_rate", "adversary") if "target_rate" in adv_cfg else None,
                measurement=adv_cfg.get("measurement", "pole"),
                r1=_num(adv_cfg, "r1", "adversary") if "r1" in adv_cfg else None,
                variant=adv_cfg.get("variant", "store"),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError("adversary", str(exc)) from None

    try:
        scenario = Scenario(geometry, channel, source, adversary)
        acceptance = AcceptanceConfig(
            z=_num(acc_cfg, "z", "acceptance", 5.0),
            qber_budget=_num(acc_cfg, "qber_budget", "acceptance") if "qber_budget" in acc_cfg else None,
            timing_tolerance=_num(acc_cfg, "timing_tolerance", "acceptance", 0.0),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("acceptance" if "acceptance" in str(exc) else "", str(exc)) from None

    rounds = _num(cfg, "rounds", "", 1000, kind=int)
    if rounds < 1:
        raise ConfigError("rounds", "must be at least 1")
    seed = _num(cfg, "seed", "", 0, kind=int)
    return scenario, rounds, seed, acceptance
