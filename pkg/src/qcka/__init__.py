"""Source-independent conference key agreement from post-matched Bell pairs."""
from .finite import FiniteKeyResult, finite_key_length, sift_counts
from .optimize import OptimizationResult, optimize_asymptotic, optimize_finite
from .params import ChannelEfficiencies, SystemParams, channel_efficiencies, load_config, reference_params, validate
from .photonic import PairLinkRates, gain_z, link_rates, pair_qber
from .rates import ConferenceRates, asymptotic_rate, binary_entropy, error_x_n, error_z_n, nbb84_baseline_rate

__all__ = [
    "ChannelEfficiencies",
    "ConferenceRates",
    "FiniteKeyResult",
    "OptimizationResult",
    "PairLinkRates",
    "SystemParams",
    "asymptotic_rate",
    "binary_entropy",
    "channel_efficiencies",
    "error_x_n",
    "error_z_n",
    "finite_key_length",
    "gain_z",
    "link_rates",
    "load_config",
    "nbb84_baseline_rate",
    "optimize_asymptotic",
    "optimize_finite",
    "pair_qber",
    "sift_counts",
    "reference_params",
    "validate",
]
