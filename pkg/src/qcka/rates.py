"""n-party error combinatorics, asymptotic conference key rate and the GHZ-source baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

from .params import SystemParams, channel_efficiencies
from .photonic import PairLinkRates, link_rates


def binary_entropy(x):
    """Shannon entropy of a Bernoulli(x) variable in bits, with H(0) = H(1) = 0."""
    if isinstance(x, np.ndarray):
        if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
            raise ValueError("binary entropy argument outside [0, 1]")
        with np.errstate(divide="ignore", invalid="ignore"):
            h = -x * np.log2(x) - (1 - x) * np.log2(1 - x)
        return np.where((x == 0) | (x == 1), 0.0, h)
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy argument outside [0, 1]: {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def _check_errors(e_per_pair: Sequence[float], n_participants: int | None) -> list[float]:
    errs = [float(e) for e in e_per_pair]
    if not errs:
        raise ValueError("need at least one pair error rate")
    if n_participants is not None and len(errs) != n_participants - 1:
        raise ValueError(f"expected {n_participants - 1} pair error rates, got {len(errs)}")
    for e in errs:
        if not 0.0 <= e <= 0.5:
            raise ValueError(f"pair error rate outside [0, 0.5]: {e}")
    return errs


def error_x_n(e_per_pair: Sequence[float], n_participants: int | None = None) -> float:
    """Probability that an odd number of the independent pair errors occur (X-basis failure)."""
    errs = _check_errors(e_per_pair, n_participants)
    return 0.5 * (1.0 - math.prod(1.0 - 2.0 * e for e in errs))


def error_x_n_symmetric(n: int, e: float) -> float:
    """Odd-order binomial sum for n-1 identical pair errors (equivalent to :func:`error_x_n`)."""
    t = n // 2 - 1 if n % 2 == 0 else (n - 3) // 2
    return sum(
        comb(n - 1, 2 * i + 1) * (1.0 - e) ** (n - 2 * i - 2) * e ** (2 * i + 1) for i in range(t + 1)
    )


def error_z_n(e_per_pair: Sequence[float], n_participants: int | None = None) -> float:
    """Probability that at least one Bob's processed Z bit disagrees with Alice's."""
    errs = _check_errors(e_per_pair, n_participants)
    return 1.0 - math.prod(1.0 - e for e in errs)


@dataclass(frozen=True)
class ConferenceRates:
    """n-party quantities derived from the per-stream link rates.

    ``signed_rate`` is the gain times the unfloored entropy bracket; ``r_asym``
    floors it at zero and ``positive`` flags whether a key is extractable.
    """

    e_x_n: float
    e_z_n: float
    e_z_marginal: tuple[float, ...]
    q_z: float
    bracket: float
    signed_rate: float
    r_asym: float
    links: tuple[PairLinkRates, ...]

    @property
    def positive(self) -> bool:
        return self.r_asym > 0.0


def conference_rates(params: SystemParams, links: Sequence[PairLinkRates] | None = None) -> ConferenceRates:
    links = tuple(links if links is not None else link_rates(params))
    errs = [lk.e_pair for lk in links]
    e_x = error_x_n(errs, params.n_participants)
    e_z = error_z_n(errs, params.n_participants)
    # Matched groups need one valid event from every stream: the scarcest stream sets the pace.
    q_group = min(lk.q_z for lk in links)
    leak_ec = params.ec_efficiency * max(binary_entropy(e) for e in errs)
    bracket = 1.0 - binary_entropy(e_x) - leak_ec
    signed = q_group * bracket
    return ConferenceRates(
        e_x_n=e_x,
        e_z_n=e_z,
        e_z_marginal=tuple(errs),
        q_z=q_group,
        bracket=bracket,
        signed_rate=signed,
        r_asym=max(signed, 0.0),
        links=links,
    )


def asymptotic_rate(params: SystemParams) -> ConferenceRates:
    """Asymptotic conference key rate per pulse (and the quantities it is built from)."""
    return conference_rates(params)


@dataclass(frozen=True)
class BaselineRates:
    gain: float
    e_party: float
    e_x: float
    e_z: float
    signed_rate: float
    rate: float


def nbb84_baseline(params: SystemParams) -> BaselineRates:
    """Simplified N-BB84 with an ideal n-photon GHZ source at the central node.

    Every participant (Alice on the first arm's length, Bob_i on arm i) must
    click on the same pulse: each arm clicks with ``1 - (1-Y0)(1-eta_i)``. An
    all-photonic coincidence carries the misalignment error per party;
    a coincidence involving any dark count carries the background error. The
    per-party error ``e`` is combined like the Bell-pair case:
    ``E_Z = 1 - (1-e)^(n-1)`` and ``E_X = (1 - (1-2e)^(n-1)) / 2``.
    """
    eff = channel_efficiencies(params)
    etas = (eff.eta_a[0], *eff.eta_b)
    y0 = params.dark_count_yield
    gain = math.prod(1.0 - (1.0 - y0) * (1.0 - eta) for eta in etas)
    signal = math.prod(etas)
    if gain <= 0.0:
        return BaselineRates(0.0, params.background_error, 0.5, 1.0, 0.0, 0.0)
    e0, ed = params.background_error, params.misalignment
    e = min(max(e0 - (e0 - ed) * signal / gain, 0.0), 0.5)
    errs = [e] * params.n_streams
    e_x = error_x_n(errs)
    e_z = error_z_n(errs)
    signed = gain * (1.0 - binary_entropy(e_x) - params.ec_efficiency * binary_entropy(e_z))
    return BaselineRates(gain, e, e_x, e_z, signed, max(signed, 0.0))


def nbb84_baseline_rate(params: SystemParams) -> float:
    return nbb84_baseline(params).rate
