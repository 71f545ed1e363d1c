from dataclasses import replace

import numpy as np
import pytest

from qcka.optimize import (
    PZ_BOUNDS,
    finite_signed_rate,
    golden_section_max,
    maximize_1d,
    optimize_asymptotic,
    optimize_finite,
)
from qcka.params import reference_params
from qcka.rates import asymptotic_rate


def dense_asymptotic_max(params, n=4000):
    grid = np.logspace(-6, 0, n)
    return max(asymptotic_rate(replace(params, lam=float(x))).r_asym for x in grid)


def test_golden_section_quadratic():
    x, fx = golden_section_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0, 1e-8)
    assert x == pytest.approx(0.3, abs=1e-7) and fx == pytest.approx(0.0, abs=1e-12)


def test_maximize_1d_finds_global_of_bimodal():
    fn = lambda x: np.exp(-((x - 0.2) / 0.05) ** 2) + 1.5 * np.exp(-((x - 0.8) / 0.05) ** 2)
    x, fx = maximize_1d(fn, 0.0, 1.0, n_grid=64, log_scale=False)
    assert x == pytest.approx(0.8, abs=1e-4) and fx == pytest.approx(1.5, rel=1e-6)


@pytest.mark.parametrize("n, d", [(3, 0.0), (3, 100.0), (4, 200.0), (6, 280.0)])
def test_asymptotic_optimum_matches_dense_grid(n, d):
    p = reference_params(n, d)
    res = optimize_asymptotic(p)
    oracle = dense_asymptotic_max(p)
    assert res.converged
    assert res.best_rate >= oracle * (1 - 1e-3)
    assert res.best_rate == pytest.approx(asymptotic_rate(replace(p, lam=res.best_lambda)).r_asym)


def test_asymptotic_all_zero_regime():
    res = optimize_asymptotic(reference_params(3, 1000.0))
    assert res.best_rate == 0.0 and not res.converged
    assert 1e-6 <= res.best_lambda <= 1.0


def test_deterministic():
    p = reference_params(4, 120.0, total_pulses=1e11)
    assert optimize_asymptotic(p) == optimize_asymptotic(p)
    assert optimize_finite(p) == optimize_finite(p)


def test_finite_optimum_matches_dense_grid():
    p = reference_params(3, 100.0, total_pulses=1e11)
    res = optimize_finite(p)
    lams = np.logspace(-4, -0.5, 120)
    pzs = np.linspace(*PZ_BOUNDS, 60)
    oracle = max(max(finite_signed_rate(replace(p, lam=float(a), basis_z_prob=float(b))), 0.0) for a in lams for b in pzs)
    assert res.converged
    assert res.best_rate >= oracle * (1 - 1e-2)
    assert res.best_rate <= asymptotic_rate(replace(p, lam=res.best_lambda)).r_asym


def test_finite_huge_block_pushes_pz_to_bound():
    res = optimize_finite(reference_params(3, 50.0, total_pulses=1e18))
    assert res.best_pz > 0.98


def test_finite_tiny_block_gives_nothing():
    res = optimize_finite(reference_params(3, 10.0, total_pulses=1e3))
    assert res.best_rate == 0.0 and not res.converged


def test_finite_signed_rate_degenerate_is_minus_inf():
    assert finite_signed_rate(reference_params(3, 10.0, total_pulses=1.0)) == -np.inf


def test_bound_checks():
    with pytest.raises(ValueError):
        optimize_asymptotic(reference_params(), bounds=(0.0, 1.0))
    with pytest.raises(ValueError):
        optimize_finite(reference_params(), pz_bounds=(0.5, 1.0))
