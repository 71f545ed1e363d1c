"""Composable finite-size key length with Chernoff-type fluctuation bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .params import SystemParams
from .photonic import link_rates
from .rates import binary_entropy, conference_rates


class DegenerateSiftError(ValueError):
    """One of the two basis samples is empty, so the phase error cannot be bounded."""


def beta_from_eps(eps: float) -> float:
    return -math.log(eps)


def sift_counts(params: SystemParams) -> tuple[int, int]:
    """Expected number of matched groups in the Z and X bases for ``total_pulses`` pulses per stream."""
    q = min(lk.q_z for lk in link_rates(params))
    pz = params.basis_z_prob
    raw = params.total_pulses * q
    return round(raw * pz * pz), round(raw * (1.0 - pz) ** 2)


def chernoff_expected_upper(m_x: float, beta: float) -> float:
    """Upper bound on the expected error count given an observed count ``m_x``."""
    return m_x + beta + math.sqrt(2.0 * beta * m_x + beta * beta)


def phase_error_transfer(m_x_star: float, n_z: float, n_x: float) -> float:
    """Rescale the X-sample error bound to the size of the Z sample."""
    if n_x <= 0:
        raise DegenerateSiftError("phase error is unestimable with an empty X sample")
    return m_x_star * n_z / n_x


def chernoff_observed_upper(m_zt_star: float, beta: float) -> float:
    """Upper bound on the observed count given its expected value ``m_zt_star``."""
    return m_zt_star + beta / 2.0 + math.sqrt(2.0 * beta * m_zt_star + beta * beta / 4.0)


@dataclass(frozen=True)
class FiniteKeyBudget:
    n_z: int
    n_x: int
    m_x: float
    beta: float
    eps_cor: float
    eps_sec: float

    def __post_init__(self):
        if self.n_z < 0 or self.n_x < 0:
            raise ValueError("sample sizes must be non-negative")
        if self.m_x < 0 or self.m_x > self.n_x:
            raise ValueError(f"error count {self.m_x} outside [0, n_x={self.n_x}]")
        if not self.beta > 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class FiniteKeyResult:
    n_z: int
    n_x: int
    m_x: float
    m_x_star: float
    m_zt_star: float
    m_zt_bar: float
    phi_z: float
    signed_length: float
    l_qcka: float
    r_finite: float


def key_length(
    budget: FiniteKeyBudget,
    n_participants: int,
    marginal_errors,
    ec_efficiency: float,
    total_pulses: float,
) -> FiniteKeyResult:
    """Extractable key length for given sample counts and observed X-basis errors."""
    if budget.n_z <= 0 or budget.n_x <= 0:
        raise DegenerateSiftError(f"degenerate sift: n_z={budget.n_z}, n_x={budget.n_x}")
    m_x_star = chernoff_expected_upper(budget.m_x, budget.beta)
    m_zt_star = phase_error_transfer(m_x_star, budget.n_z, budget.n_x)
    m_zt_bar = chernoff_observed_upper(m_zt_star, budget.beta)
    phi = min(max(m_zt_bar / budget.n_z, 0.0), 1.0)
    # Past 1/2 the phase-error entropy saturates: no key.
    h_phi = binary_entropy(min(phi, 0.5))
    leak_ec = ec_efficiency * max(binary_entropy(e) for e in marginal_errors)
    overhead = math.log2(2.0 * (n_participants - 1) / budget.eps_cor) + 2.0 * math.log2(1.0 / (2.0 * budget.eps_sec))
    signed = budget.n_z * (1.0 - h_phi - leak_ec) - overhead
    length = max(signed, 0.0)
    return FiniteKeyResult(
        n_z=budget.n_z,
        n_x=budget.n_x,
        m_x=budget.m_x,
        m_x_star=m_x_star,
        m_zt_star=m_zt_star,
        m_zt_bar=m_zt_bar,
        phi_z=phi,
        signed_length=signed,
        l_qcka=length,
        r_finite=length / total_pulses,
    )


def finite_key_length(params: SystemParams) -> FiniteKeyResult:
    """Finite-size key for ``params.total_pulses`` pulses per stream at ``params.basis_z_prob``.

    The X-basis error count is taken at its expected value ``n_x * E_X(n)``.
    """
    conf = conference_rates(params)
    n_z, n_x = sift_counts(params)
    budget = FiniteKeyBudget(
        n_z=n_z,
        n_x=n_x,
        m_x=n_x * conf.e_x_n,
        beta=beta_from_eps(params.eps_chernoff),
        eps_cor=params.eps_cor,
        eps_sec=params.eps_sec,
    )
    return key_length(budget, params.n_participants, conf.e_z_marginal, params.ec_efficiency, params.total_pulses)
