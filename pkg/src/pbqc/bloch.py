"""Qubit bases on the Bloch sphere.

Angles follow the (theta, phi) parameterisation of the encoding unitary
``U(theta, phi)``; a basis is identified with the Bloch direction of
``U(theta, phi)|0>``.  The finite basis lattice divides the sphere into rings
``theta_m = m*pi/N`` carrying ``1 + floor(2N sin theta_m)`` pixels each.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterator

import numpy as np

TOL = 1e-12
TWO_PI = 2.0 * math.pi

# Guard for floor(2N sin theta) when the product lands a few ulps under an
# integer, e.g. 12*sin(pi/6) == 5.999999999999999.
_FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class BlochAngles:
    """A direction on the Bloch sphere.

    ``phi`` is normalised into ``[0, 2*pi)`` and forced to zero at the poles,
    so two instances compare equal whenever they denote the same basis.
    """

    theta: float
    phi: float = 0.0

    def __post_init__(self) -> None:
        theta = float(self.theta)
        phi = float(self.phi)
        if not (math.isfinite(theta) and math.isfinite(phi)):
            raise ValueError(f"angles must be finite, got ({theta}, {phi})")
        if theta < -TOL or theta > math.pi + TOL:
            raise ValueError(f"theta must lie in [0, pi], got {theta}")
        theta = min(max(theta, 0.0), math.pi)
        phi = math.fmod(phi, TWO_PI)
        if phi < 0.0:
            phi += TWO_PI
        if phi >= TWO_PI - TOL:
            phi = 0.0
        if theta <= TOL or theta >= math.pi - TOL:
            phi = 0.0
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    def antipode(self) -> "BlochAngles":
        return BlochAngles(math.pi - self.theta, self.phi + math.pi)

    def vector(self) -> np.ndarray:
        """Unit Bloch vector in the (theta, phi) frame used by ``error_probability``."""
        st = math.sin(self.theta)
        return np.array(
            [st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)]
        )


NORTH_POLE = BlochAngles(0.0, 0.0)
SOUTH_POLE = BlochAngles(math.pi, 0.0)


def ring_size(n_rings: int, m: int) -> int:
    """Number of pixels on ring ``m`` of a lattice with ``n_rings`` = N."""
    return 1 + math.floor(2 * n_rings * math.sin(m * math.pi / n_rings) + _FLOOR_EPS)


@dataclass(frozen=True)
class BasisLattice:
    """Finite, approximately uniform set of K measurement bases.

    Pixels are stored ring by ring; ``indices[i]`` is the ``(m, n)`` label of
    ``pixels[i]``.  Rings run over ``m = 0..N`` so both poles are present.
    """

    n_rings: int
    pixels: tuple[BlochAngles, ...]
    indices: tuple[tuple[int, int], ...]

    @property
    def k_count(self) -> int:
        return len(self.pixels)

    @property
    def ring_sizes(self) -> tuple[int, ...]:
        sizes = [0] * (self.n_rings + 1)
        for m, _ in self.indices:
            sizes[m] += 1
        return tuple(sizes)

    @property
    def ring_thetas(self) -> tuple[float, ...]:
        return tuple(m * math.pi / self.n_rings for m in range(self.n_rings + 1))

    @property
    def rings(self) -> np.ndarray:
        """Ring index ``m`` of every pixel, in pixel order."""
        return np.array([m for m, _ in self.indices], dtype=int)

    @property
    def closed_form_count(self) -> int:
        """The area-based estimate floor(N (1 + 2 cot(pi/2N))); diagnostic only."""
        n = self.n_rings
        return math.floor(n * (1.0 + 2.0 / math.tan(math.pi / (2 * n))) + _FLOOR_EPS)

    def __len__(self) -> int:
        return self.k_count

    def __iter__(self) -> Iterator[BlochAngles]:
        return iter(self.pixels)

    def thetas(self) -> np.ndarray:
        return np.array([p.theta for p in self.pixels])

    def phis(self) -> np.ndarray:
        return np.array([p.phi for p in self.pixels])


def build_lattice(n_rings: int) -> BasisLattice:
    """Enumerate the basis lattice with ``theta_m = m*pi/N`` and
    ``phi_{m,n} = pi*n / (N sin theta_m)`` for ``n = 0..floor(2N sin theta_m)``.

    A pixel whose phi evaluates to 2*pi is kept (normalised to 0), so each ring
    holds exactly ``1 + floor(2N sin theta_m)`` entries.
    """
    if isinstance(n_rings, bool) or int(n_rings) != n_rings or n_rings < 1:
        raise ValueError(f"N must be a positive integer, got {n_rings!r}")
    n_rings = int(n_rings)
    pixels: list[BlochAngles] = []
    indices: list[tuple[int, int]] = []
    for m in range(n_rings + 1):
        theta = m * math.pi / n_rings
        sin_theta = math.sin(theta)
        for n in range(ring_size(n_rings, m)):
            phi = 0.0 if n == 0 else math.pi * n / (n_rings * sin_theta)
            pixels.append(BlochAngles(theta, phi))
            indices.append((m, n))
    return BasisLattice(n_rings, tuple(pixels), tuple(indices))


def unitary(angles: BlochAngles) -> np.ndarray:
    """Encoding unitary U(theta, phi); column x is the state encoding bit x."""
    c = math.cos(angles.theta / 2.0)
    s = math.sin(angles.theta / 2.0)
    e = complex(math.cos(angles.phi), math.sin(angles.phi))
    return np.array([[c, e * s], [-e.conjugate() * s, c]], dtype=complex)


def error_probability(state: BlochAngles, measurement: BlochAngles) -> float:
    """Probability that measuring ``state`` in basis ``measurement`` returns the
    opposite of the encoded bit.  Symmetric in its two arguments.
    """
    d_theta = state.theta - measurement.theta
    d_phi = state.phi - measurement.phi
    p = math.sin(d_theta / 2.0) ** 2 + (
        math.sin(d_phi / 2.0) ** 2 * math.sin(state.theta) * math.sin(measurement.theta)
    )
    return min(max(p, 0.0), 1.0)


def flipped_error_probability(state: BlochAngles, measurement: BlochAngles) -> float:
    """Error probability when the measured bit is reported flipped."""
    s_theta = state.theta + measurement.theta
    d_phi = state.phi - measurement.phi
    p = math.cos(s_theta / 2.0) ** 2 + (
        math.cos(d_phi / 2.0) ** 2 * math.sin(state.theta) * math.sin(measurement.theta)
    )
    return min(max(p, 0.0), 1.0)


def pairwise_error_probabilities(thetas, phis, meas_thetas, meas_phis) -> np.ndarray:
    """Elementwise ``error_probability`` over broadcastable angle arrays."""
    p = np.sin((np.asarray(thetas) - meas_thetas) / 2.0) ** 2 + (
        np.sin((np.asarray(phis) - meas_phis) / 2.0) ** 2
        * np.sin(thetas)
        * np.sin(meas_thetas)
    )
    return np.clip(p, 0.0, 1.0)


def error_probabilities(
    thetas: np.ndarray, phis: np.ndarray, measurement: BlochAngles
) -> np.ndarray:
    """Vectorised ``error_probability`` against one measurement basis."""
    return pairwise_error_probabilities(thetas, phis, measurement.theta, measurement.phi)


def write_lattice_csv(lattice: BasisLattice, fh: IO[str]) -> None:
    """Write the lattice as CSV with columns m, n, theta, phi."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["m", "n", "theta", "phi"])
    for (m, n), px in zip(lattice.indices, lattice.pixels):
        writer.writerow([m, n, format(px.theta, ".12g"), format(px.phi, ".12g")])
