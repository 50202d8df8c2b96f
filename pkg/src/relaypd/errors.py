"""Exception types shared across the library."""


class RelaypdError(Exception):
    """Base class for all library errors."""


class GraphError(RelaypdError):
    """Invalid or unusable communication graph."""


class ConfigError(RelaypdError):
    """Malformed or contradictory run configuration."""


class DataError(RelaypdError):
    """Unusable dataset input."""


class ValidationError(RelaypdError):
    """Stepsizes or problem data fail a validity check."""


class DivergenceError(RelaypdError):
    """A run produced a non-finite quantity.

    Carries the iteration index and (1-based) agent id where the blowup
    was detected, so sweeps can report the offending run.
    """

    def __init__(self, message, iteration=None, agent=None, quantity=None):
        super().__init__(message)
        self.iteration = iteration
        self.agent = agent
        self.quantity = quantity


class OracleError(RelaypdError):
    """The reference solver failed to reach its tolerance."""


class CalibrationError(RelaypdError):
    """No noise level satisfies the requested privacy budget."""


class UnsupportedRegularizerError(RelaypdError):
    """A known but deliberately unimplemented regularizer kind."""
