"""canyonsim: site-specific urban-canyon channel simulator and calibration toolchain.

Generates time-varying multipath channel realizations directly from street
geometry (one-sided canyon widths, trajectories, LOS/NLOS state) using
width-conditioned statistical distributions, and re-estimates all model
parameters from multipath component logs.
"""

__version__ = "0.1.0"

from .errors import CanyonSimError, ConfigError, ModelError, NumericalError

__all__ = [
    "CanyonSimError",
    "ConfigError",
    "ModelError",
    "NumericalError",
    "__version__",
]
