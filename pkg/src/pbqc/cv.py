"""Gaussian-state protocols with homodyne detection.

Quadratures are ``q = (a + a^dag)/2`` and ``p = i(a^dag - a)/2`` so the vacuum
has variance 1/4 in each.  States are stored as (mean, covariance) in the
ordering ``(q1, p1, q2, p2, ...)``.  Every operation broadcasts over leading
batch axes, which lets the Monte Carlo routines push one state per round
through the same symplectic maps as a single state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

VACUUM_VARIANCE = 0.25


def omega(n_modes: int) -> np.ndarray:
    """Symplectic form for ``n_modes`` modes."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        dim = mean.shape[-1]
        if dim not in (2, 4) or cov.shape[-2:] != (dim, dim):
            raise ValueError(f"need 1 or 2 modes, got mean {mean.shape}, cov {cov.shape}")
        if not np.allclose(cov, np.swapaxes(cov, -1, -2), rtol=0.0, atol=1e-12):
            raise ValueError("covariance matrix is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_modes(self) -> int:
        return self.mean.shape[-1] // 2

    def symplectic_eigenvalues(self) -> np.ndarray:
        """Moduli of the eigenvalues of i*Omega*cov, one per mode (sorted)."""
        ev = np.linalg.eigvals(1j * omega(self.n_modes) @ self.cov)
        ev = np.sort(np.abs(ev), axis=-1)
        return ev[..., ::2]

    def is_physical(self, tol: float = 1e-9) -> bool:
        return bool(np.all(self.symplectic_eigenvalues() >= VACUUM_VARIANCE - tol))

    def transform(self, sym: np.ndarray) -> "GaussianState":
        """Apply a linear (symplectic) map to every quadrature."""
        mean = (sym @ self.mean[..., None])[..., 0]
        return GaussianState(mean, sym @ self.cov @ np.swapaxes(sym, -1, -2))

    def marginal(self, indices: list[int]) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of a subset of quadratures."""
        idx = np.asarray(indices)
        return self.mean[..., idx], self.cov[..., idx[:, None], idx[None, :]]


def vacuum(n_modes: int = 1) -> GaussianState:
    return GaussianState(np.zeros(2 * n_modes), VACUUM_VARIANCE * np.eye(2 * n_modes))


def rotation_matrix(theta) -> np.ndarray:
    """Phase-space action of R(theta) = exp(i theta a^dag a) on (q, p)."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def squeeze_matrix(s: float) -> np.ndarray:
    """Action of S(s): a -> a cosh s - a^dag sinh s, i.e. q -> e^{-s} q, p -> e^{s} p."""
    return np.diag([math.exp(-s), math.exp(s)])


def _embed(single: np.ndarray, mode: int, n_modes: int) -> np.ndarray:
    batch = single.shape[:-2]
    full = np.broadcast_to(np.eye(2 * n_modes), batch + (2 * n_modes, 2 * n_modes)).copy()
    full[..., 2 * mode : 2 * mode + 2, 2 * mode : 2 * mode + 2] = single
    return full


def rotate(state: GaussianState, theta, mode: int = 0) -> GaussianState:
    return state.transform(_embed(rotation_matrix(theta), mode, state.n_modes))


def squeeze(state: GaussianState, s: float, mode: int = 0) -> GaussianState:
    return state.transform(_embed(squeeze_matrix(s), mode, state.n_modes))


def displace(state: GaussianState, alpha, mode: int = 0) -> GaussianState:
    """D(alpha) with real alpha: a -> a + alpha, so the q mean shifts by alpha."""
    alpha = np.asarray(alpha, dtype=float)
    shift = np.zeros(alpha.shape + (2 * state.n_modes,))
    shift[..., 2 * mode] = alpha
    return GaussianState(state.mean + shift, np.broadcast_to(state.cov, shift.shape + (shift.shape[-1],)))


def tensor(a: GaussianState, b: GaussianState) -> GaussianState:
    """Product state of two single-mode states (batch axes broadcast)."""
    batch = np.broadcast_shapes(a.mean.shape[:-1], b.mean.shape[:-1])
    mean = np.concatenate(
        [np.broadcast_to(a.mean, batch + (2,)), np.broadcast_to(b.mean, batch + (2,))], -1
    )
    cov = np.zeros(batch + (4, 4))
    cov[..., :2, :2] = a.cov
    cov[..., 2:, 2:] = b.cov
    return GaussianState(mean, cov)


def beam_splitter_matrix(transmissivity: float = 0.5) -> np.ndarray:
    """Outputs ``c = sqrt(T) a - sqrt(1-T) b`` and ``d = sqrt(1-T) a + sqrt(T) b``."""
    t = math.sqrt(transmissivity)
    r = math.sqrt(1.0 - transmissivity)
    return np.array(
        [
            [t, 0.0, -r, 0.0],
            [0.0, t, 0.0, -r],
            [r, 0.0, t, 0.0],
            [0.0, r, 0.0, t],
        ]
    )


def beam_splitter(state: GaussianState, transmissivity: float = 0.5) -> GaussianState:
    if state.n_modes != 2:
        raise ValueError("beam splitter acts on a two-mode state")
    return state.transform(beam_splitter_matrix(transmissivity))


def lossy_channel(state: GaussianState, eta: float) -> GaussianState:
    """Pure loss: mix with vacuum on a beam splitter of transmissivity eta, keep the transmitted mode."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    mixed = beam_splitter(tensor(state, vacuum()), eta)
    mean, cov = mixed.marginal([0, 1])
    return GaussianState(mean, cov)


def prepare_state(s: float, alpha, theta) -> GaussianState:
    """R(theta) D(alpha) S(s) |0>."""
    return rotate(displace(squeeze(vacuum(), s), alpha), theta)


def honest_variance(s: float, eta: float) -> float:
    """Conditional variance expected from an honest prover behind transmittance eta."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    return 0.25 * math.exp(-2.0 * s) + (1.0 - eta) / (4.0 * eta)


def attack_variance(s: float) -> float:
    """Conditional variance produced by the beam-splitter double-homodyne attack."""
    if s < 0:
        raise ValueError(f"s must be non-negative, got {s}")
    return 0.25 * math.exp(-2.0 * s) + 0.25


def cv_secure(eta: float, s: float = 0.0) -> bool:
    """True when the honest noise is strictly below what the attack produces.

    Equality (eta = 1/2) counts as insecure.
    """
    return honest_variance(s, eta) < attack_variance(s)


def _sample(mean: np.ndarray, var: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return mean + np.sqrt(np.maximum(var, 0.0)) * rng.standard_normal(mean.shape)


def simulate_honest_rounds(s: float, alpha, theta, eta: float, rng: np.random.Generator) -> np.ndarray:
    """Reported values alpha' of an honest prover, one per (alpha, theta) pair.

    The prover undoes the rotation, the state passes the lossy channel, and
    the q quadrature is measured.
    """
    alpha, theta = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(theta, float))
    state = prepare_state(s, alpha, theta)
    received = lossy_channel(rotate(state, -theta), eta)
    mean, cov = received.marginal([0])
    return _sample(mean[..., 0], cov[..., 0, 0], rng)


def simulate_attack_rounds(
    s: float, alpha, theta, eta_claimed: float, rng: np.random.Generator
) -> np.ndarray:
    """Reported values alpha' under the beam-splitter attack.

    The intercepted state is split 50:50 with vacuum; q of output c and p of
    output d are measured jointly, then combined once theta is known.
    """
    if not 0.0 < eta_claimed <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta_claimed}")
    alpha, theta = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(theta, float))
    split = beam_splitter(tensor(prepare_state(s, alpha, theta), vacuum()))
    mean, cov = split.marginal([0, 3])
    chol = np.linalg.cholesky(cov)
    z = rng.standard_normal(mean.shape)
    q_c, p_d = np.moveaxis(mean + (chol @ z[..., None])[..., 0], -1, 0)
    return math.sqrt(2.0 * eta_claimed) * (q_c * np.cos(theta) + p_d * np.sin(theta))


def simulate_honest_round(s, alpha, theta, eta, rng) -> float:
    return float(simulate_honest_rounds(s, [alpha], [theta], eta, rng)[0])


def simulate_attack_round(s, alpha, theta, eta_claimed, rng) -> float:
    return float(simulate_attack_rounds(s, [alpha], [theta], eta_claimed, rng)[0])


def conditional_variance(alpha, alpha_prime, eta: float) -> tuple[float, float]:
    """Sample mean of (alpha - alpha'/sqrt(eta))^2 and its standard error."""
    alpha = np.asarray(alpha, dtype=float)
    alpha_prime = np.asarray(alpha_prime, dtype=float)
    if alpha.size == 0 or alpha.shape != alpha_prime.shape:
        raise ValueError("need equally sized, non-empty alpha and alpha' arrays")
    if alpha.size < 2:
        raise ValueError("need at least two rounds for a standard error")
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    sq = (alpha - alpha_prime / math.sqrt(eta)) ** 2
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(sq.size))


def draw_rounds(
    n_rounds: int, rng: np.random.Generator, sigma2: float = 1.0, theta: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Verifier choices: alpha ~ N(0, sigma2), theta ~ U[0, pi] unless fixed."""
    alpha = rng.normal(0.0, math.sqrt(sigma2), n_rounds)
    thetas = rng.uniform(0.0, math.pi, n_rounds) if theta is None else np.full(n_rounds, theta)
    return alpha, thetas


def monte_carlo_report(
    s: float,
    eta: float,
    n_rounds: int,
    seed: int,
    attack: bool = False,
    sigma2: float = 1.0,
    theta: float | None = None,
) -> dict:
    """Estimate the conditional variance from simulated rounds.

    With ``n_rounds == 0`` only the analytic values are filled in.
    """
    report = {
        "s": s,
        "eta": eta,
        "n_rounds": n_rounds,
        "seed": seed,
        "attack": attack,
        "delta_estimate": None,
        "std_error": None,
        "delta_analytic_honest": honest_variance(s, eta),
        "delta_analytic_attack": attack_variance(s),
    }
    if n_rounds:
        rng = np.random.default_rng(seed)
        alpha, thetas = draw_rounds(n_rounds, rng, sigma2, theta)
        simulate = simulate_attack_rounds if attack else simulate_honest_rounds
        alpha_prime = simulate(s, alpha, thetas, eta, rng)
        report["delta_estimate"], report["std_error"] = conditional_variance(alpha, alpha_prime, eta)
    return report
