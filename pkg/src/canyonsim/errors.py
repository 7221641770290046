"""Exception hierarchy shared across the package.

The split mirrors the CLI exit codes: configuration problems (bad files,
violated invariants) exit 2, numerical/model failures exit 3, I/O exits 4.
"""


class CanyonSimError(Exception):
    """Base class for all canyonsim errors."""


class ConfigError(CanyonSimError):
    """Invalid configuration, parameter file, or input log."""


class ModelError(CanyonSimError):
    """Model parameters inconsistent with the requested operation."""


class NumericalError(CanyonSimError):
    """Numerical failure: singular geometry, non-convergence, degenerate fit."""
