import itertools
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qcka.params import reference_params
from qcka.photonic import PairLinkRates
from qcka.rates import (
    asymptotic_rate,
    binary_entropy,
    conference_rates,
    error_x_n,
    error_x_n_symmetric,
    error_z_n,
    nbb84_baseline,
)


def enumerate_errors(errs):
    """Exact (P[odd number of flips], P[any flip]) by listing all flip patterns."""
    odd = anyf = 0.0
    for flips in itertools.product((0, 1), repeat=len(errs)):
        p = math.prod(e if f else 1 - e for e, f in zip(errs, flips))
        if sum(flips) % 2:
            odd += p
        if any(flips):
            anyf += p
    return odd, anyf


def test_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == binary_entropy(1.0) == 0.0
    assert binary_entropy(0.02) == pytest.approx(0.14144054254182065, rel=1e-14)
    arr = binary_entropy(np.array([0.0, 0.02, 0.5]))
    assert arr[0] == 0.0 and arr[2] == 1.0
    with pytest.raises(ValueError):
        binary_entropy(1.2)
    with pytest.raises(ValueError):
        binary_entropy(np.array([-0.1]))


@pytest.mark.parametrize(
    "n, e, expected", [(4, 0.1, 0.244), (5, 0.1, 0.2952), (3, 0.05, 0.095)]
)
def test_ex_reference_values(n, e, expected):
    assert error_x_n([e] * (n - 1)) == pytest.approx(expected, abs=1e-12)
    assert error_x_n_symmetric(n, e) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("n", range(3, 11))
@pytest.mark.parametrize("e", [0.0, 1e-3, 0.02, 0.1, 0.25, 0.5])
def test_binomial_sum_equals_parity_identity(n, e):
    assert error_x_n_symmetric(n, e) == pytest.approx(error_x_n([e] * (n - 1)), abs=1e-12)


@given(st.lists(st.floats(0, 0.5), min_size=1, max_size=7))
def test_error_formulas_match_enumeration(errs):
    odd, anyf = enumerate_errors(errs)
    assert error_x_n(errs) == pytest.approx(odd, abs=1e-12)
    assert error_z_n(errs) == pytest.approx(anyf, abs=1e-12)
    # An odd number of flips implies at least one flip.
    assert error_x_n(errs) <= error_z_n(errs) + 1e-15


def test_error_argument_checks():
    with pytest.raises(ValueError, match="expected 2"):
        error_x_n([0.1], 3)
    with pytest.raises(ValueError):
        error_z_n([0.6])
    with pytest.raises(ValueError):
        error_x_n([])


def test_noiseless_rate_equals_gain():
    p = reference_params(4, 0.0, source="perfect", misalignment=0.0, dark_count_yield=0.0, detector_efficiency=1.0)
    r = asymptotic_rate(p)
    assert r.e_x_n == 0.0 and r.r_asym == 1.0 == r.q_z


def test_rate_uses_scarcest_stream_and_worst_error():
    links = [PairLinkRates(1e-3, 1e-3, 0.01, 0.1, 0.1), PairLinkRates(5e-4, 5e-4, 0.03, 0.1, 0.1)]
    r = conference_rates(reference_params(3), links)
    expected = 5e-4 * (1 - binary_entropy(error_x_n([0.01, 0.03])) - 1.16 * binary_entropy(0.03))
    assert r.r_asym == pytest.approx(expected, rel=1e-14)


def test_rate_is_zero_when_errors_high():
    r = asymptotic_rate(reference_params(3, 10.0, misalignment=0.2))
    assert r.r_asym == 0.0 and r.signed_rate < 0 and not r.positive


@given(st.floats(0, 300), st.integers(3, 6))
def test_rate_decreases_with_distance(d, n):
    p = reference_params(n, d)
    assert asymptotic_rate(p.with_distance(d + 5)).r_asym <= asymptotic_rate(p).r_asym


def test_baseline_noiseless_gain_is_product_of_transmittances():
    p = reference_params(4, 30.0, dark_count_yield=0.0, misalignment=0.0)
    eta = 0.56 * 10 ** (-0.16 * 30 / 10)
    b = nbb84_baseline(p)
    assert b.gain == pytest.approx(eta**4, rel=1e-12)
    assert b.rate == pytest.approx(eta**4, rel=1e-12)


def test_baseline_dies_faster_than_post_matching():
    # Log-slope per km over a stretch where both are positive.
    def slope(fn, n):
        a, b = fn(reference_params(n, 50.0)), fn(reference_params(n, 100.0))
        return (math.log10(b) - math.log10(a)) / 50.0

    for n in (3, 4):
        ours = slope(lambda p: asymptotic_rate(replace(p, lam=0.01)).r_asym, n)
        base = slope(lambda p: nbb84_baseline(p).rate, n)
        assert ours == pytest.approx(-0.032, rel=0.05)
        assert base == pytest.approx(-0.016 * n, rel=0.05)
