import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbqc.bloch import (
    NORTH_POLE,
    SOUTH_POLE,
    BlochAngles,
    build_lattice,
    error_probabilities,
    error_probability,
    flipped_error_probability,
    pairwise_error_probabilities,
    ring_size,
    unitary,
    write_lattice_csv,
)

thetas = st.floats(0.0, math.pi, allow_nan=False)
phis = st.floats(-10.0, 10.0, allow_nan=False)
angles = st.builds(BlochAngles, thetas, phis)


def overlap_error(state: BlochAngles, meas: BlochAngles, x: int = 0) -> float:
    """|<U_m (1-x) | U_s x>|^2 straight from the unitaries."""
    amp = unitary(meas).conj().T @ unitary(state)
    return abs(amp[1 - x, x]) ** 2


@pytest.mark.parametrize(
    "n, sizes",
    [
        (1, [1, 1]),
        (2, [1, 5, 1]),
        (3, [1, 6, 6, 1]),
        (4, [1, 6, 9, 6, 1]),
    ],
)
def test_ring_sizes(n, sizes):
    lattice = build_lattice(n)
    assert list(lattice.ring_sizes) == sizes
    assert lattice.k_count == sum(sizes) == len(lattice)


def test_k_counts():
    assert build_lattice(4).k_count == 23
    assert build_lattice(8).k_count == 87
    # area estimate is only approximate
    assert build_lattice(3).closed_form_count == 13
    assert build_lattice(8).closed_form_count == 88


def test_ring_size_floor_guard():
    # 12 * sin(pi/6) evaluates a hair below 6
    assert 12 * math.sin(math.pi / 6) < 6
    assert ring_size(6, 1) == 7


def test_lattice_includes_poles():
    lattice = build_lattice(4)
    assert lattice.pixels[0] == NORTH_POLE
    assert lattice.pixels[-1] == SOUTH_POLE
    assert lattice.ring_thetas[-1] == pytest.approx(math.pi)


def test_lattice_phi_grid():
    lattice = build_lattice(4)
    ring1 = [p for p, (m, _) in zip(lattice.pixels, lattice.indices) if m == 1]
    step = math.pi / (4 * math.sin(math.pi / 4))
    for n, px in enumerate(ring1):
        assert px.phi == pytest.approx(math.fmod(n * step, 2 * math.pi), abs=1e-12)
    # the equator wraps onto phi = 0 and keeps the duplicate
    equator = [p for p, (m, _) in zip(lattice.pixels, lattice.indices) if m == 2]
    assert equator[0] == equator[-1]


@pytest.mark.parametrize("bad", [0, -1, 2.5, True])
def test_build_lattice_rejects(bad):
    with pytest.raises(ValueError):
        build_lattice(bad)


def test_angles_normalisation():
    assert BlochAngles(1.0, 2 * math.pi).phi == 0.0
    assert BlochAngles(1.0, -math.pi / 2).phi == pytest.approx(1.5 * math.pi)
    assert BlochAngles(0.0, 1.3) == NORTH_POLE
    with pytest.raises(ValueError):
        BlochAngles(4.0)
    with pytest.raises(ValueError):
        BlochAngles(float("nan"))


@given(angles)
def test_unitary_is_unitary(a):
    u = unitary(a)
    assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-12)


@given(angles, angles, st.integers(0, 1))
def test_error_probability_matches_overlap(s, m, x):
    assert error_probability(s, m) == pytest.approx(overlap_error(s, m, x), abs=1e-12)


@given(angles, angles)
def test_error_probability_is_angle_between_bases(s, m):
    cos_gamma = float(s.vector() @ m.vector())
    assert error_probability(s, m) == pytest.approx((1 - cos_gamma) / 2, abs=1e-12)


@given(angles, angles)
def test_flip_complements(s, m):
    assert flipped_error_probability(s, m) == pytest.approx(1 - error_probability(s, m), abs=1e-12)


@given(angles, angles)
def test_symmetry(s, m):
    assert error_probability(s, m) == pytest.approx(error_probability(m, s), abs=1e-15)


@given(angles)
def test_antipode_always_errs(a):
    assert error_probability(a, a) == pytest.approx(0.0, abs=1e-15)
    assert error_probability(a, a.antipode()) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30)
@given(st.lists(st.tuples(angles, angles), min_size=1, max_size=8))
def test_vectorised_matches_scalar(pairs):
    s_t = np.array([p[0].theta for p in pairs])
    s_p = np.array([p[0].phi for p in pairs])
    m_t = np.array([p[1].theta for p in pairs])
    m_p = np.array([p[1].phi for p in pairs])
    got = pairwise_error_probabilities(s_t, s_p, m_t, m_p)
    want = [error_probability(a, b) for a, b in pairs]
    assert np.allclose(got, want, atol=1e-15)


def test_error_against_pole_is_ring_function():
    lattice = build_lattice(6)
    p = error_probabilities(lattice.thetas(), lattice.phis(), NORTH_POLE)
    assert np.allclose(p, np.sin(lattice.rings * math.pi / 12) ** 2)


def test_lattice_csv():
    buf = io.StringIO()
    write_lattice_csv(build_lattice(2), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "m,n,theta,phi"
    assert len(lines) == 1 + 7
    assert lines[-1].startswith("2,0,3.14159265359")
