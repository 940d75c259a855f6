import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phaseqss.channel import ChannelParams, basis_class_probabilities
from phaseqss.optimizer import expected_stats
from phaseqss.security import (
    ObservedStats,
    SecurityEpsilons,
    asymptotic_key_rate,
    binary_entropy,
    concentration_deviation,
    finite_key_length,
    phase_error_rate,
    phase_error_upper_bound,
)

# 40-digit mpmath evaluation of the same formulas
EP_005_001 = 0.17064617389342965
DC_8346 = 309.97883142344015
DC_1E6 = 3393.070212207556
CHAIN35_EP_BAR = 0.27065009450652400
CHAIN35_DELTA = 0.027186614198425422
L35 = 9029
ASYM_REF = 2.440450439158520e-4

rates = st.floats(0, 0.5)


def test_epsilons_defaults():
    eps = SecurityEpsilons()
    assert eps.eps_c == eps.eps_pa == eps.eps == eps.eps_a == 1e-10
    assert eps.eps_s == pytest.approx(1e-5 + 1e-10)
    with pytest.raises(ValueError):
        SecurityEpsilons(eps_a=0)


def test_observed_stats_validation():
    with pytest.raises(ValueError):
        ObservedStats(10, 10, 11, 0)
    with pytest.raises(ValueError):
        ObservedStats(-1, 10, 0, 0)


def test_binary_entropy():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(0.49991595816452800, rel=1e-14)
    with pytest.raises(ValueError):
        binary_entropy(1.2)


def test_phase_error_rate_examples():
    for eby in (0.0, 0.013, 0.25, 0.5):
        assert phase_error_rate(eby, 0.0) == eby
    assert phase_error_rate(0.0, 0.01) == pytest.approx(0.0396, abs=1e-12)
    assert phase_error_rate(0.05, 0.01) == pytest.approx(EP_005_001, rel=1e-13)
    with pytest.raises(ValueError):
        phase_error_rate(0.6, 0.01)
    with pytest.raises(ValueError):
        phase_error_rate(0.1, 0.7)


@given(rates, rates)
def test_phase_error_rate_dominates_bit_error_rate(eby, delta):
    assert phase_error_rate(eby, delta) >= eby - 1e-15
    assert phase_error_rate(eby, delta) <= 0.5


def test_concentration_deviation():
    assert concentration_deviation(0, 1e-10) == 0.0
    assert concentration_deviation(8346, 1e-10) == pytest.approx(DC_8346, rel=1e-13)
    assert concentration_deviation(1e6, 1e-10) == pytest.approx(DC_1E6, rel=1e-13)


@given(st.integers(0, 10**12), st.floats(1e-300, 0.999))
def test_concentration_deviation_scales_as_sqrt(n, eps_a):
    assert concentration_deviation(4 * n, eps_a) == pytest.approx(2 * concentration_deviation(n, eps_a), rel=1e-15)


def test_chain_asymptotic_mode_reduces_to_observed_rate():
    stats = ObservedStats(n_x=10_000, n_y=2_000, m_x=30, m_y=37)
    chain = phase_error_upper_bound(stats, mu=0.0, q_mu=0.01, finite=False)
    assert chain.delta == 0.0
    assert chain.ep_bar == pytest.approx(37 / 2000, rel=1e-14)


def test_chain_35db_published_counts():
    stats = ObservedStats(n_x=73954, n_y=8346, m_x=round(0.003 * 73954), m_y=round(0.0030 * 8346))
    assert stats.m_y == 25
    q_mu = 73954 / (1e10 * 0.544)
    chain = phase_error_upper_bound(stats, 8.6e-4, q_mu)
    assert chain.delta == pytest.approx(CHAIN35_DELTA, rel=1e-9)
    assert chain.m_y_prime == pytest.approx(25 + DC_8346, rel=1e-13)
    assert chain.ep_bar == pytest.approx(CHAIN35_EP_BAR, rel=1e-9)
    key = finite_key_length(73954, chain.ep_bar, 0.003, 1.16, n_total=1e10)
    assert key.key_length_bits == L35
    assert 8.53e-7 / 5 <= key.rate_per_pulse <= 8.53e-7 * 5


def test_chain_clamps_at_half():
    chain = phase_error_upper_bound(ObservedStats(100, 50, 0, 50), mu=1e-3, q_mu=0.01)
    assert chain.eby_prime == 0.5
    assert chain.ep_bar == 0.5


@given(
    st.integers(1, 10**7), st.integers(1, 10**6), st.floats(0, 1), st.floats(1e-6, 1e-2), st.floats(1e-4, 1)
)
def test_chain_is_monotone(n_x, n_y, frac, mu, q_mu):
    stats = ObservedStats(n_x, n_y, 0, int(frac * n_y))
    try:
        chain = phase_error_upper_bound(stats, mu, q_mu)
    except ValueError:
        return
    assert chain.ep_bar >= chain.ep_prime - 1e-15
    assert chain.ep_prime >= phase_error_rate(min(stats.eby, 0.5), chain.delta) - 1e-15
    assert 0 <= chain.ep_bar <= 0.5


def test_chain_rejects_empty_counts():
    with pytest.raises(ZeroDivisionError):
        phase_error_upper_bound(ObservedStats(0, 10, 0, 0), 1e-3, 0.01)


def test_finite_key_length_examples():
    assert finite_key_length(10**6, 0.5, 0.01).key_length_bits == 0
    exact = 1000 - math.log2(2e10) - math.log2(0.25e20)
    length = finite_key_length(1000, 0.0, 0.0).key_length_bits
    assert abs(length - exact) <= 1
    assert length == 901
    assert finite_key_length(1000, 0.0, 0.0, n_total=1e4).rate_per_pulse == pytest.approx(0.0901)


def test_finite_key_length_is_monotone_on_grid():
    grid = np.linspace(0, 0.5, 26)
    for ebx in grid[::5]:
        lengths = [finite_key_length(10**7, ep, ebx).key_length_bits for ep in grid]
        assert all(a >= b for a, b in zip(lengths, lengths[1:]))
    for ep in grid[::5]:
        lengths = [finite_key_length(10**7, ep, ebx).key_length_bits for ebx in grid]
        assert all(a >= b for a, b in zip(lengths, lengths[1:]))


def test_asymptotic_key_rate():
    params = ChannelParams(mu=0.01, eta_d=0.1, length_km=0, p_d=1e-8, e_d=0.02)
    assert asymptotic_key_rate(params, 1.16) == pytest.approx(ASYM_REF, rel=1e-10)
    assert asymptotic_key_rate(ChannelParams(mu=0.01, eta_d=0.1, e_d=0.3)) == 0.0
    ideal = ChannelParams(mu=0.01, eta_d=0.1, p_d=0.0, e_d=0.0)
    assert asymptotic_key_rate(ideal, delta=0.0) == pytest.approx(ideal.derived().q_mu, rel=1e-14)


@pytest.mark.parametrize("n_total", [1e10, 1e12])
def test_finite_chain_converges_to_asymptotic_rate(n_total):
    params = ChannelParams(mu=0.005, length_km=50, e_d=0.02)
    stats = expected_stats(params, n_total)
    q_mu = params.derived().q_mu
    chain = phase_error_upper_bound(stats, mu=0.0, q_mu=q_mu, finite=False)
    key = finite_key_length(stats.n_x, chain.ep_bar, stats.ebx, 1.16, n_total=n_total)
    asymptotic = asymptotic_key_rate(params, 1.16, delta=0.0) * basis_class_probabilities(params.p_x)[0]
    assert key.rate_per_pulse == pytest.approx(asymptotic, rel=0.01)
