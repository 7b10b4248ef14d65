"""Python bindings for the JDAN-NFN forecasting core."""

from ._mdc import (
    Checkpoint,
    ConfigError,
    Distribution,
    JdanArch,
    NumericError,
    copula_cdf,
    run,
    synth_margins,
)

__all__ = [
    "Checkpoint",
    "ConfigError",
    "Distribution",
    "JdanArch",
    "NumericError",
    "copula_cdf",
    "run",
    "synth_margins",
]
