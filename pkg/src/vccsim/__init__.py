"""Cache-aided downlink MU-MIMO delivery: precoding, fair power allocation,
and Monte Carlo sum-rate experiments."""

from . import allocation, caching, channel, cli, errors, experiments, precoding, recipes

__all__ = [
    "allocation",
    "caching",
    "channel",
    "cli",
    "errors",
    "experiments",
    "precoding",
    "recipes",
]

__version__ = "0.1.0"
