"""Autoregressive policies over multidimensional discrete action spaces with
computationally efficient entropy-bonus estimators.

The heavy lifting lives in the compiled extension; this package re-exports
its surface.
"""

from entropg._core import (
    BanditConfig,
    Env,
    HuntersConfig,
    Policy,
    config_reference,
    gaussian_smoothed_check,
    train_from_config,
    verify,
)

__all__ = [
    "BanditConfig",
    "Env",
    "HuntersConfig",
    "Policy",
    "config_reference",
    "gaussian_smoothed_check",
    "train_from_config",
    "verify",
]
