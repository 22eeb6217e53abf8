"""Exception hierarchy shared across the simulator."""


class SimulationError(Exception):
    """Base class for every error raised by the simulator."""


class InvalidArgumentError(SimulationError, ValueError):
    """Raised when an operation receives an argument outside its contract."""


class ConfigError(SimulationError):
    """Raised when an experiment configuration cannot be loaded or validated."""


class EngineInvariantError(SimulationError):
    """Raised by debug checks when a simulator invariant is violated."""
