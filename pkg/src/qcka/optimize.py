"""Deterministic rate maximization over the source parameter (and Z-basis probability).

Both searches run on the *signed* objective (rate before flooring at zero),
which keeps a usable slope in regions where no key can be extracted, and
report the floored value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .finite import DegenerateSiftError, finite_key_length
from .params import SystemParams
from .rates import asymptotic_rate

LAMBDA_BOUNDS = (1e-6, 1.0)
PZ_BOUNDS = (0.5, 0.999)
INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OptimizationResult:
    best_lambda: float
    best_pz: float | None
    best_rate: float
    evaluations: int
    converged: bool


class _Counted:
    def __init__(self, fn: Callable[[float], float]):
        self.fn = fn
        self.calls = 0

    def __call__(self, x: float) -> float:
        self.calls += 1
        return self.fn(x)


def golden_section_max(fn, lo: float, hi: float, xtol: float) -> tuple[float, float]:
    """Maximize a unimodal ``fn`` on [lo, hi] until the bracket is narrower than ``xtol``."""
    a, b = lo, hi
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


def _local_maxima(values: np.ndarray) -> list[int]:
    idx = []
    n = len(values)
    for i in range(n):
        left = values[i - 1] if i > 0 else -np.inf
        right = values[i + 1] if i < n - 1 else -np.inf
        if values[i] >= left and values[i] >= right and np.isfinite(values[i]):
            idx.append(i)
    # Flat plateaus produce runs of equal maxima; one representative per run is enough.
    dedup = [i for k, i in enumerate(idx) if k == 0 or i != idx[k - 1] + 1]
    return dedup


def maximize_1d(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    n_grid: int,
    log_scale: bool,
    rtol: float = 1e-4,
) -> tuple[float, float]:
    """Grid scan followed by golden-section refinement around every local maximum."""
    if log_scale:
        grid = np.logspace(math.log10(lo), math.log10(hi), n_grid)
    else:
        grid = np.linspace(lo, hi, n_grid)
    values = np.array([fn(float(x)) for x in grid])
    best_x, best_f = float(grid[int(np.argmax(values))]), float(np.max(values))
    for i in _local_maxima(values):
        a = float(grid[max(i - 1, 0)])
        b = float(grid[min(i + 1, n_grid - 1)])
        if log_scale:
            # Relative tolerance on x is an absolute tolerance on log x.
            u, fu = golden_section_max(lambda t: fn(math.exp(t)), math.log(a), math.log(b), math.log1p(rtol))
            x = math.exp(u)
        else:
            x, fu = golden_section_max(fn, a, b, rtol * max(abs(a), abs(b)))
        if fu > best_f:
            best_x, best_f = x, fu
    return best_x, best_f


def optimize_asymptotic(
    params: SystemParams,
    bounds: tuple[float, float] = LAMBDA_BOUNDS,
    n_grid: int = 64,
    rtol: float = 1e-4,
) -> OptimizationResult:
    """Maximize the asymptotic rate over the source parameter ``lam``."""
    lo, hi = bounds
    if not 0 < lo < hi:
        raise ValueError(f"invalid lambda bounds {bounds}")
    objective = _Counted(lambda lam: asymptotic_rate(replace(params, lam=lam)).signed_rate)
    lam, signed = maximize_1d(objective, lo, hi, n_grid=n_grid, log_scale=True, rtol=rtol)
    return OptimizationResult(
        best_lambda=lam,
        best_pz=None,
        best_rate=max(signed, 0.0),
        evaluations=objective.calls,
        converged=signed > 0.0,
    )


def finite_signed_rate(params: SystemParams) -> float:
    """Unfloored finite key length per pulse; ``-inf`` when a basis sample is empty."""
    try:
        return finite_key_length(params).signed_length / params.total_pulses
    except DegenerateSiftError:
        return -math.inf


def optimize_finite(
    params: SystemParams,
    lambda_bounds: tuple[float, float] = LAMBDA_BOUNDS,
    pz_bounds: tuple[float, float] = PZ_BOUNDS,
    rounds: int = 3,
    n_grid_lambda: int = 64,
    n_grid_pz: int = 32,
    rtol: float = 1e-4,
) -> OptimizationResult:
    """Alternating coordinate search over (lam, p_z) for the finite-size rate.

    Starts from the asymptotic-optimal ``lam`` and ``p_z = 0.9`` (clipped to the bounds).
    """
    if not 0 < lambda_bounds[0] < lambda_bounds[1]:
        raise ValueError(f"invalid lambda bounds {lambda_bounds}")
    if not 0 < pz_bounds[0] < pz_bounds[1] < 1:
        raise ValueError(f"invalid p_z bounds {pz_bounds}")
    start = optimize_asymptotic(params, lambda_bounds, n_grid_lambda, rtol)
    evaluations = start.evaluations
    lam = start.best_lambda
    pz = min(max(0.9, pz_bounds[0]), pz_bounds[1])
    best = finite_signed_rate(replace(params, lam=lam, basis_z_prob=pz))
    evaluations += 1
    for _ in range(rounds):
        f_lam = _Counted(lambda x: finite_signed_rate(replace(params, lam=x, basis_z_prob=pz)))
        x, fx = maximize_1d(f_lam, *lambda_bounds, n_grid=n_grid_lambda, log_scale=True, rtol=rtol)
        evaluations += f_lam.calls
        if fx > best:
            lam, best = x, fx
        f_pz = _Counted(lambda p: finite_signed_rate(replace(params, lam=lam, basis_z_prob=p)))
        p, fp = maximize_1d(f_pz, *pz_bounds, n_grid=n_grid_pz, log_scale=False, rtol=rtol)
        evaluations += f_pz.calls
        if fp > best:
            pz, best = p, fp
    return OptimizationResult(
        best_lambda=lam,
        best_pz=pz,
        best_rate=max(best, 0.0),
        evaluations=evaluations,
        converged=best > 0.0,
    )
