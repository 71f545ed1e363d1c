import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from qcka.params import reference_params
from qcka.photonic import (
    UndefinedQBERError,
    correlated_click_prob,
    gain_k,
    gain_single_pair,
    gain_z,
    link_rates,
    pair_emission_prob,
    pair_qber,
)


def series_gain(eta_a, eta_b, y0a, y0b, lam, kmax=600):
    """Direct sum over photon-pair number, independent of the closed form."""
    k = np.arange(kmax, dtype=float)
    return float(np.sum(gain_k(k, eta_a, eta_b, y0a, y0b, lam)))


def mode_resolved_signal(eta_a, eta_b, lam, kmax=400):
    """P(agreeing single clicks) - P(opposite single clicks), dark counts off, by enumeration.

    k pairs put m photons in one polarization mode and k-m in the other at
    both ends (m uniform on 0..k); a detector clicks if any photon reaching
    it survives.
    """
    total = 0.0
    for k in range(1, kmax):
        pk = pair_emission_prob(k, lam)
        if pk < 1e-300:
            break
        inner = 0.0
        for m in range(k + 1):
            a_h, a_v = 1 - (1 - eta_a) ** (k - m), 1 - (1 - eta_a) ** m
            b_h, b_v = 1 - (1 - eta_b) ** (k - m), 1 - (1 - eta_b) ** m
            only_ah, only_av = a_h * (1 - a_v), a_v * (1 - a_h)
            only_bh, only_bv = b_h * (1 - b_v), b_v * (1 - b_h)
            inner += only_ah * only_bh + only_av * only_bv - only_ah * only_bv - only_av * only_bh
        total += pk * inner / (k + 1)
    return total


def test_emission_distribution_normalised():
    k = np.arange(600)
    assert np.sum(pair_emission_prob(k, 0.1)) == pytest.approx(1.0, abs=1e-12)
    assert pair_emission_prob(0, 0.1) == pytest.approx(0.8264462809917355, rel=1e-14)
    # Mean number of pairs is 2 lam.
    assert np.sum(k * pair_emission_prob(k, 0.3)) == pytest.approx(0.6, rel=1e-10)


def test_gain_k_values():
    assert gain_k(1, 1.0, 1.0, 0.0, 0.0, 0.1) == pytest.approx(2 * 0.1 / 1.1**3, rel=1e-14)


def test_gain_z_reference_values():
    assert gain_z(0.5, 0.5, 0.0, 0.0, 0.1) == pytest.approx(0.05127365530672337, rel=1e-12)
    assert gain_z(1.0, 1.0, 0.0, 0.0, 0.1) == pytest.approx(0.17355371900826447, rel=1e-12)
    assert gain_z(1.0, 1.0, 0.0, 0.0, 0.1) == pytest.approx(1 - pair_emission_prob(0, 0.1), rel=1e-12)


@pytest.mark.parametrize("eta", [1.0, 0.5, 0.1, 1e-2, 1e-4])
@pytest.mark.parametrize("lam", [1e-4, 1e-2, 0.1, 0.5])
@pytest.mark.parametrize("y0", [0.0, 1e-7, 1e-3])
def test_gain_z_matches_series(eta, lam, y0):
    expected = series_gain(eta, eta * 0.7, y0, y0, lam)
    assert gain_z(eta, eta * 0.7, y0, y0, lam) == pytest.approx(expected, rel=1e-10, abs=1e-300)


def test_gain_z_precise_at_tiny_transmittance():
    # Around 400 km the naive closed form has cancelled to noise.
    eta = 0.56 * 10 ** (-0.16 * 400 / 10)
    assert gain_z(eta, eta, 0.0, 0.0, 0.01) == pytest.approx(series_gain(eta, eta, 0.0, 0.0, 0.01), rel=1e-10)


def test_zero_gain_limits():
    assert gain_z(0.0, 0.0, 0.0, 0.0, 0.1) == 0.0
    with pytest.raises(UndefinedQBERError):
        pair_qber(0.0, 0.0, 0.0, 0.0, 0.1, 0.5, 0.02)


def test_qber_reference_value():
    assert pair_qber(0.5, 0.5, 0.0, 0.0, 0.1, 0.5, 0.02) == pytest.approx(0.0655672, abs=1e-7)


@pytest.mark.parametrize("eta_a, eta_b, lam", [(0.5, 0.5, 0.1), (0.9, 0.2, 0.05), (0.01, 0.03, 0.4), (1.0, 1.0, 0.2)])
def test_signal_term_matches_mode_enumeration(eta_a, eta_b, lam):
    assert correlated_click_prob(eta_a, eta_b, lam) == pytest.approx(
        mode_resolved_signal(eta_a, eta_b, lam), rel=1e-10
    )


def test_dark_count_dominated_qber_tends_to_background():
    e = pair_qber(1e-9, 1e-9, 1e-3, 1e-3, 0.05, 0.5, 0.02)
    assert e == pytest.approx(0.5, abs=1e-5)


def test_noiseless_single_pair_source():
    p = reference_params(3, 0.0, source="perfect", misalignment=0.0, dark_count_yield=0.0, detector_efficiency=1.0)
    for lk in link_rates(p):
        assert lk.q_z == 1.0 and lk.e_pair == 0.0
    assert gain_single_pair(0.5, 0.25, 0.0, 0.0) == 0.125


@given(
    lam=st.floats(1e-5, 1.0),
    eta1=st.floats(1e-6, 1.0),
    eta2=st.floats(1e-6, 1.0),
    y0=st.floats(0.0, 1e-4),
)
def test_gain_monotone_and_bounded(lam, eta1, eta2, y0):
    lo, hi = sorted((eta1, eta2))
    assume(hi > lo * (1 + 1e-9))
    g_lo = gain_z(lo, lo, y0, y0, lam)
    g_hi = gain_z(hi, hi, y0, y0, lam)
    assert 0.0 <= g_lo <= g_hi <= 1.0


@given(lam=st.floats(1e-5, 1.0), eta=st.floats(1e-6, 1.0), ed=st.floats(0, 0.5), y0=st.floats(0, 1e-3))
def test_qber_in_range(lam, eta, ed, y0):
    q = gain_z(eta, eta, y0, y0, lam)
    assume(q > 0)
    e = pair_qber(eta, eta, y0, y0, lam, 0.5, ed)
    assert 0.0 <= e <= 0.5
    # More misalignment never lowers the error.
    assert pair_qber(eta, eta, y0, y0, lam, 0.5, min(ed + 0.01, 0.5)) >= e - 1e-15


def test_link_rates_per_stream():
    p = reference_params(4, 0.0)
    p = p.__class__(**{**p.__dict__, "distances_km": (0.0, 20.0, 40.0)})
    links = link_rates(p)
    assert [lk.q_z for lk in links] == sorted((lk.q_z for lk in links), reverse=True)
    assert all(lk.q_x == lk.q_z for lk in links)
    assert math.isclose(links[0].eta_a, links[0].eta_b)
