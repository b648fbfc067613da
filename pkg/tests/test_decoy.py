import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pbqc import decoy
from pbqc.decoy import (
    ChannelModel,
    IntensityPair,
    NonMonotoneDecisionError,
    adversary_stats,
    adversary_stats_by_sum,
    decoy_lower_bound_r1,
    honest_stats,
    intensity_grid,
    is_secure,
    loss_db,
    no_decoy_attack_feasible,
    optimize_intensities,
    poisson_weights,
    required_single_photon_rate,
    security_boundary,
)

CHANNEL = ChannelModel(eta=1.0, y0=1e-5, e_det=0.01)


def test_honest_stats_reference():
    s = honest_stats(CHANNEL.with_eta(0.05), 0.12)
    assert s.rate == pytest.approx(5.992e-3, rel=1e-3)
    assert s.qber == pytest.approx(1.082e-2, rel=1e-3)


def test_honest_stats_by_hand():
    eta, mu, y0, e = 0.3, 0.5, 1e-3, 0.02
    s = honest_stats(ChannelModel(eta, y0, e), mu)
    signal = 1 - math.exp(-eta * mu)
    assert s.rate == pytest.approx(y0 + signal, abs=1e-15)
    assert s.qber == pytest.approx((y0 / 2 + e * signal) / (y0 + signal), abs=1e-15)


def test_honest_stats_degenerate():
    assert honest_stats(ChannelModel(0.5, 0.0, 0.0), 0.0).degenerate


@given(st.floats(1e-4, 3.0))
def test_poisson_weights_normalised(mu):
    w = poisson_weights(mu)
    assert w.sum() == pytest.approx(1.0, abs=1e-13)
    assert w[1] == pytest.approx(mu * math.exp(-mu))


@given(st.floats(1e-4, 2.0), st.floats(0.0, 1.0))
def test_adversary_closed_form_matches_sum(mu, r1):
    a = adversary_stats(mu, r1)
    b = adversary_stats_by_sum(mu, r1)
    assert a.rate == pytest.approx(b.rate, rel=1e-12, abs=1e-15)
    assert a.qber == pytest.approx(b.qber, rel=1e-9, abs=1e-15)


@given(st.floats(0.01, 0.3), st.floats(0.01, 1.0))
def test_required_rate_matches_honest_rate(mu, eta):
    ch = CHANNEL.with_eta(eta)
    r1 = required_single_photon_rate(ch, mu)
    if 0.0 <= r1 <= 1.0:
        assert adversary_stats(mu, r1).rate == pytest.approx(honest_stats(ch, mu).rate, rel=1e-10)


def test_no_decoy_threshold_side():
    assert no_decoy_attack_feasible(CHANNEL.with_eta(0.06), 0.018)
    assert not no_decoy_attack_feasible(CHANNEL.with_eta(0.08), 0.018)


def test_multi_photon_overshoot_is_insecure():
    # at large mu the multi-photon fraction alone exceeds the honest rate
    ch = CHANNEL.with_eta(0.01)
    assert required_single_photon_rate(ch, 0.5) < 0
    assert no_decoy_attack_feasible(ch, 0.5)


def test_decoy_bound_clamped():
    pair = IntensityPair(0.12, 0.1)
    for eta in (1e-4, 0.01, 0.05, 0.5, 1.0):
        ch = CHANNEL.with_eta(eta)
        r1 = decoy_lower_bound_r1(honest_stats(ch, 0.12), honest_stats(ch, 0.1), pair)
        assert 0.0 <= r1 <= 1.0


def test_decoy_bound_needs_two_intensities():
    with pytest.raises(ValueError):
        decoy_lower_bound_r1(honest_stats(CHANNEL, 0.1), honest_stats(CHANNEL, 0.0), IntensityPair(0.1))


def test_intensity_pair_validation():
    with pytest.raises(ValueError):
        IntensityPair(0.1, 0.2)
    with pytest.raises(ValueError):
        IntensityPair(0.1, -0.01)
    with pytest.raises(ValueError):
        IntensityPair(float("inf"))


@pytest.mark.parametrize("kwargs", [{"eta": 0.0}, {"eta": 1.5}, {"y0": -1e-3}, {"e_det": 0.5}])
def test_channel_validation(kwargs):
    with pytest.raises(ValueError):
        ChannelModel(**kwargs)


def test_boundary_decoy():
    res = security_boundary(CHANNEL, IntensityPair(0.12, 0.1), use_decoy=True)
    assert res.eta_star == pytest.approx(0.054323, abs=1e-4)
    assert res.loss_db == pytest.approx(loss_db(res.eta_star))
    assert not is_secure(CHANNEL.with_eta(res.eta_star - 2e-4), IntensityPair(0.12, 0.1), True)
    assert is_secure(CHANNEL.with_eta(res.eta_star), IntensityPair(0.12, 0.1), True)


def test_boundary_no_decoy():
    res = security_boundary(CHANNEL, IntensityPair(0.018), use_decoy=False)
    assert res.eta_star == pytest.approx(0.070554, abs=1e-4)
    assert res.loss_db == pytest.approx(11.51, abs=0.01)


def test_boundary_trace_sorted_and_monotone():
    res = security_boundary(CHANNEL, IntensityPair(0.12, 0.1), use_decoy=True)
    etas = [t["eta"] for t in res.decision_trace]
    assert etas == sorted(etas)
    flags = [t["secure"] for t in res.decision_trace]
    assert flags == sorted(flags)


def test_boundary_noiseless_secure_everywhere():
    res = security_boundary(ChannelModel(1.0, 0.0, 0.0), IntensityPair(0.12, 0.1), True)
    assert res.secure_everywhere
    assert res.eta_star == 1e-6


def test_boundary_insecure_everywhere():
    # bright pulses plus a noisy detector hide the attack even without loss
    res = security_boundary(ChannelModel(1.0, 0.0, 0.1), IntensityPair(3.0), use_decoy=False)
    assert res.insecure_everywhere
    assert res.eta_star == 1.0


def test_non_monotone_is_reported(monkeypatch):
    monkeypatch.setattr(decoy, "is_secure", lambda ch, pair, use: 0.01 < ch.eta < 0.1)
    with pytest.raises(NonMonotoneDecisionError) as info:
        security_boundary(CHANNEL, IntensityPair(0.12, 0.1), True)
    assert len(info.value.trace) == 121


def test_optimize_no_decoy():
    grid = intensity_grid(np.round(np.arange(0.005, 0.0505, 0.001), 12))
    best, res = optimize_intensities(CHANNEL, False, grid)
    assert best.mu1 == pytest.approx(0.018)
    assert res.eta_star == pytest.approx(0.0705, abs=2e-4)


def test_intensity_grid_orders_pairs():
    grid = intensity_grid([0.1, 0.2], [0.0, 0.1, 0.2])
    assert [(p.mu1, p.mu2) for p in grid] == [(0.2, 0.1)]
    with pytest.raises(ValueError):
        optimize_intensities(CHANNEL, True, [])


def test_boundary_result_dict():
    res = security_boundary(CHANNEL, IntensityPair(0.018), use_decoy=False)
    d = res.to_dict()
    assert d["parameters"]["mode"] == "no-decoy"
    assert d["parameters"]["mu2"] is None
