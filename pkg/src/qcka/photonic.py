"""Analytic model of a single Bell-pair link: emission statistics, gain and QBER.

Two source models are supported:

* ``spdc``: type-II polarization-entangled SPDC, k pairs per pulse with
  probability ``(k+1) lam^k / (1+lam)^(k+2)``.
* ``perfect``: exactly one Bell pair per pulse.

Functions are written with plain arithmetic so they accept floats or numpy
arrays alike.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import SystemParams, channel_efficiencies


class UndefinedQBERError(ValueError):
    """QBER requested for a link with zero coincidence gain."""


@dataclass(frozen=True)
class PairLinkRates:
    """Observables of one Alice-Bob_i pair stream. ``q_x`` equals ``q_z`` by assumption."""

    q_z: float
    q_x: float
    e_pair: float
    eta_a: float
    eta_b: float


def pair_emission_prob(k, lam):
    """Probability of emitting exactly ``k`` pairs in one pulse."""
    return (k + 1) * lam**k / (1.0 + lam) ** (k + 2)


def gain_k(k, eta_a, eta_b, y0a, y0b, lam):
    """Coincidence probability contributed by k-pair emissions."""
    click_a = 1.0 - (1.0 - y0a) * (1.0 - eta_a) ** k
    click_b = 1.0 - (1.0 - y0b) * (1.0 - eta_b) ** k
    return click_a * click_b * pair_emission_prob(k, lam)


def _mixed_denominator(eta_a, eta_b, lam):
    return 1.0 + eta_a * lam + eta_b * lam - eta_a * eta_b * lam


def gain_z(eta_a, eta_b, y0a, y0b, lam):
    """Closed-form sum of :func:`gain_k` over all k.

    Evaluated as

        1 - (1-Y0A)/A^2 - (1-Y0B)/B^2 + (1-Y0A)(1-Y0B)/D^2,
        A = 1 + eta_a lam,  B = 1 + eta_b lam,  D = 1 + eta_a lam + eta_b lam - eta_a eta_b lam,

    but regrouped so that no two O(1) terms cancel (AB - D = eta_a eta_b lam (1+lam)).
    The naive form loses all precision once the gain drops below ~1e-12.
    """
    x = eta_a * lam
    y = eta_b * lam
    a = 1.0 + x
    b = 1.0 + y
    d = _mixed_denominator(eta_a, eta_b, lam)
    ab = a * b
    independent = (y0a + 2.0 * x + x * x) * (y0b + 2.0 * y + y * y) / (ab * ab)
    overlap = eta_a * eta_b * lam * (1.0 + lam) * (ab + d) / (d * d * ab * ab)
    return independent + (1.0 - y0a) * (1.0 - y0b) * overlap


def correlated_click_prob(eta_a, eta_b, lam):
    """Probability of a correlated (minus anti-correlated) single-mode coincidence.

    Dark counts are excluded; this is the signal term of the QBER expression.
    """
    return (
        2.0 * eta_a * eta_b * lam * (1.0 + lam)
        / ((1.0 + eta_a * lam) * (1.0 + eta_b * lam) * _mixed_denominator(eta_a, eta_b, lam))
    )


def _qber_from_signal(signal, q, e0, ed):
    if np.any(np.asarray(q) <= 0):
        raise UndefinedQBERError("QBER is undefined when the coincidence gain is zero")
    e = e0 - (e0 - ed) * signal / q
    return np.clip(e, 0.0, 0.5) if isinstance(e, np.ndarray) else min(max(float(e), 0.0), 0.5)


def pair_qber(eta_a, eta_b, y0a, y0b, lam, e0, ed):
    """Bit error rate of a valid event on one pair stream, clamped to [0, 0.5]."""
    q = gain_z(eta_a, eta_b, y0a, y0b, lam)
    return _qber_from_signal(correlated_click_prob(eta_a, eta_b, lam), q, e0, ed)


# --- single-pair ("perfect") source ----------------------------------------

def gain_single_pair(eta_a, eta_b, y0a, y0b):
    return (1.0 - (1.0 - y0a) * (1.0 - eta_a)) * (1.0 - (1.0 - y0b) * (1.0 - eta_b))


def qber_single_pair(eta_a, eta_b, y0a, y0b, e0, ed):
    q = gain_single_pair(eta_a, eta_b, y0a, y0b)
    return _qber_from_signal(eta_a * eta_b, q, e0, ed)


def link_rates(params: SystemParams) -> list[PairLinkRates]:
    """Per-stream gain and QBER for validated ``params``."""
    eff = channel_efficiencies(params)
    y0 = params.dark_count_yield
    out = []
    for eta_a, eta_b in zip(eff.eta_a, eff.eta_b):
        if params.source == "perfect":
            q = gain_single_pair(eta_a, eta_b, y0, y0)
            e = qber_single_pair(eta_a, eta_b, y0, y0, params.background_error, params.misalignment)
        else:
            q = gain_z(eta_a, eta_b, y0, y0, params.lam)
            e = pair_qber(eta_a, eta_b, y0, y0, params.lam, params.background_error, params.misalignment)
        out.append(PairLinkRates(q_z=float(q), q_x=float(q), e_pair=float(e), eta_a=eta_a, eta_b=eta_b))
    return out

