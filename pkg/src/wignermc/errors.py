"""Exception types shared across the package.

``exit_code`` is the process status the command-line layer maps each
failure class to; 1 stays reserved for unexpected exceptions.
"""


class WignerMCError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(WignerMCError):
    """Invalid configuration: bad value, unknown key, inconsistent fields."""

    exit_code = 2


class NumericalError(WignerMCError):
    """Numerical breakdown: non-finite state, singular propagator."""

    exit_code = 3


class EstimationError(WignerMCError):
    """Estimation cannot proceed: all trajectories capped, empty ensemble."""

    exit_code = 4
