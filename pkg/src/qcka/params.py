"""Experiment configuration, validation and per-arm channel transmittance.

All downstream modules consume a validated :class:`SystemParams`. The record is
frozen; use :func:`dataclasses.replace` to derive variants (the optimizer does
this for ``lam`` and ``p_z``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

SOURCES = ("spdc", "perfect")

# Chernoff failure probability used by the finite-key bounds.
DEFAULT_EPS_CHERNOFF = 1e-10


class ParameterError(ValueError):
    """Raised when a parameter violates its declared range."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class ConfigError(ValueError):
    """Malformed configuration file (carries the offending line number)."""

    def __init__(self, message: str, lineno: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}".strip())
        self.lineno = lineno


@dataclass(frozen=True)
class SystemParams:
    """Full experiment configuration for an n-party symmetric (or asymmetric) star.

    ``lam`` is half the mean photon-pair number of the SPDC source. ``source``
    selects the emission model: ``"spdc"`` (thermal pair statistics) or
    ``"perfect"`` (exactly one Bell pair per pulse, ``lam`` unused).
    """

    n_participants: int = 3
    lam: float = 0.05
    detector_efficiency: float = 0.56
    fiber_loss_db_per_km: float = 0.16
    distances_km: tuple[float, ...] = (0.0, 0.0)
    dark_count_yield: float = 1e-7
    background_error: float = 0.5
    misalignment: float = 0.02
    ec_efficiency: float = 1.16
    basis_z_prob: float = 0.5
    eps_cor: float = 1.2e-9
    eps_sec: float = 1.2e-9
    eps_chernoff: float = DEFAULT_EPS_CHERNOFF
    total_pulses: float = 1e11
    source: str = "spdc"

    @property
    def n_streams(self) -> int:
        return self.n_participants - 1

    @property
    def symmetric(self) -> bool:
        return len(set(self.distances_km)) <= 1

    def with_distance(self, distance_km: float) -> "SystemParams":
        """Symmetric star with every arm at ``distance_km``."""
        return replace(self, distances_km=(float(distance_km),) * self.n_streams)

    def with_participants(self, n: int) -> "SystemParams":
        """Change n, keeping a symmetric star at the first arm's length."""
        d = self.distances_km[0] if self.distances_km else 0.0
        return replace(self, n_participants=n, distances_km=(float(d),) * (n - 1))


def reference_params(n: int = 3, distance_km: float = 0.0, **overrides) -> SystemParams:
    """Published simulation constants (e0, ed, eta_d, p_d, alpha, f, eps) for an n-party star."""
    base = SystemParams(n_participants=n, distances_km=(float(distance_km),) * (n - 1))
    return replace(base, **overrides) if overrides else base


def _in_open_closed(x: float, lo: float, hi: float) -> bool:
    return lo < x <= hi


def validate(params: SystemParams) -> SystemParams:
    """Return ``params`` unchanged if every invariant holds, else raise ParameterError."""
    p = params
    if not isinstance(p.n_participants, int) or isinstance(p.n_participants, bool):
        raise ParameterError("n", "participant count must be an integer")
    if p.n_participants < 3:
        raise ParameterError("n", f"conference requires n >= 3 (got {p.n_participants})")
    if not (math.isfinite(p.lam) and p.lam > 0):
        raise ParameterError("lambda", f"source parameter must be finite and > 0 (got {p.lam})")
    if not _in_open_closed(p.detector_efficiency, 0.0, 1.0):
        raise ParameterError("eta_d", f"detector efficiency out of range (0, 1] (got {p.detector_efficiency})")
    if not (math.isfinite(p.fiber_loss_db_per_km) and p.fiber_loss_db_per_km >= 0):
        raise ParameterError("alpha_db_km", f"fiber loss must be >= 0 (got {p.fiber_loss_db_per_km})")
    if len(p.distances_km) != p.n_streams:
        raise ParameterError(
            "distances_km",
            f"expected {p.n_streams} distances for n={p.n_participants}, got {len(p.distances_km)}",
        )
    for d in p.distances_km:
        if not (math.isfinite(d) and d >= 0):
            raise ParameterError("distances_km", f"distance must be finite and >= 0 (got {d})")
    if not (0.0 <= p.dark_count_yield < 1.0):
        raise ParameterError("y0", f"dark count yield out of range [0, 1) (got {p.dark_count_yield})")
    if not (0.0 <= p.background_error <= 1.0):
        raise ParameterError("e0", f"background error out of range [0, 1] (got {p.background_error})")
    if not (0.0 <= p.misalignment <= 0.5):
        raise ParameterError("ed", f"misalignment out of range [0, 0.5] (got {p.misalignment})")
    if not (math.isfinite(p.ec_efficiency) and p.ec_efficiency >= 1.0):
        raise ParameterError("f", f"error-correction efficiency must be >= 1 (got {p.ec_efficiency})")
    if not (0.0 < p.basis_z_prob < 1.0):
        raise ParameterError("pz", f"Z-basis probability out of range (0, 1) (got {p.basis_z_prob})")
    for name, value in (("eps_cor", p.eps_cor), ("eps_sec", p.eps_sec), ("eps_chernoff", p.eps_chernoff)):
        if not (0.0 < value < 1.0):
            raise ParameterError(name, f"failure probability out of range (0, 1) (got {value})")
    if not (math.isfinite(p.total_pulses) and p.total_pulses >= 1):
        raise ParameterError("pulses", f"pulse count must be >= 1 (got {p.total_pulses})")
    if p.source not in SOURCES:
        raise ParameterError("source", f"unknown source model {p.source!r}; expected one of {SOURCES}")
    return p


@dataclass(frozen=True)
class ChannelEfficiencies:
    """Per-stream transmittance (detector efficiency included) for Alice's and Bob_i's arm."""

    eta_a: tuple[float, ...]
    eta_b: tuple[float, ...]


def arm_transmittance(detector_efficiency: float, loss_db_per_km: float, distance_km: float) -> float:
    return detector_efficiency * 10.0 ** (-loss_db_per_km * distance_km / 10.0)


def channel_efficiencies(params: SystemParams) -> ChannelEfficiencies:
    etas = tuple(
        arm_transmittance(params.detector_efficiency, params.fiber_loss_db_per_km, d)
        for d in params.distances_km
    )
    # Alice's arm for stream i has the same length as Bob_i's.
    return ChannelEfficiencies(eta_a=etas, eta_b=etas)


# --- config file -----------------------------------------------------------

_FLOAT_KEYS = {
    "lambda": "lam",
    "eta_d": "detector_efficiency",
    "alpha_db_km": "fiber_loss_db_per_km",
    "y0": "dark_count_yield",
    "e0": "background_error",
    "ed": "misalignment",
    "f": "ec_efficiency",
    "pz": "basis_z_prob",
    "eps_cor": "eps_cor",
    "eps_sec": "eps_sec",
    "eps_chernoff": "eps_chernoff",
    "pulses": "total_pulses",
}
CONFIG_KEYS = ("n", *_FLOAT_KEYS, "distance_km", "distances_km", "source")


def parse_config(text: str, path: str | None = None, base: SystemParams | None = None) -> SystemParams:
    """Parse ``key = value`` lines (``#`` comments) on top of ``base`` (reference defaults).

    The result is validated. Unknown keys, duplicate keys and unparsable values
    raise :class:`ConfigError` with the line number.
    """
    seen: dict[str, int] = {}
    values: dict[str, object] = {}
    single_distance: float | None = None
    distance_list: tuple[float, ...] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        key, _, value = (s.strip() for s in line.partition("="))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, path)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", lineno, path)
        seen[key] = lineno
        try:
            if key == "n":
                values["n_participants"] = int(value)
            elif key == "source":
                values["source"] = value.lower()
            elif key == "distance_km":
                single_distance = float(value)
            elif key == "distances_km":
                distance_list = tuple(float(v) for v in value.split(",") if v.strip())
            else:
                values[_FLOAT_KEYS[key]] = float(value)
        except ValueError:
            raise ConfigError(f"cannot parse value {value!r} for {key!r}", lineno, path) from None
    if single_distance is not None and distance_list is not None:
        raise ConfigError("give either distance_km or distances_km, not both", seen["distances_km"], path)

    params = base or SystemParams()
    n = int(values.get("n_participants", params.n_participants))
    if distance_list is not None:
        distances = distance_list
    elif single_distance is not None:
        distances = (single_distance,) * max(n - 1, 0)
    elif len(params.distances_km) == n - 1:
        distances = params.distances_km
    else:
        d0 = params.distances_km[0] if params.distances_km else 0.0
        distances = (d0,) * max(n - 1, 0)
    params = replace(params, distances_km=tuple(distances), **values)
    return validate(params)


def load_config(path: str | Path, base: SystemParams | None = None) -> SystemParams:
    path = Path(path)
    return parse_config(path.read_text(), str(path), base=base)


def format_config(params: SystemParams) -> str:
    """Inverse of :func:`parse_config` (round-trips every field)."""
    lines = [
        f"n = {params.n_participants}",
        f"lambda = {params.lam!r}",
        f"eta_d = {params.detector_efficiency!r}",
        f"alpha_db_km = {params.fiber_loss_db_per_km!r}",
        "distances_km = " + ", ".join(repr(float(d)) for d in params.distances_km),
        f"y0 = {params.dark_count_yield!r}",
        f"e0 = {params.background_error!r}",
        f"ed = {params.misalignment!r}",
        f"f = {params.ec_efficiency!r}",
        f"pz = {params.basis_z_prob!r}",
        f"eps_cor = {params.eps_cor!r}",
        f"eps_sec = {params.eps_sec!r}",
        f"eps_chernoff = {params.eps_chernoff!r}",
        f"pulses = {params.total_pulses!r}",
        f"source = {params.source}",
    ]
    return "\n".join(lines) + "\n"
