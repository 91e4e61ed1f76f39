"""Exception types shared across the simulator."""


class SasimError(Exception):
    """Base class for all simulator errors."""


class ConfigParseError(SasimError):
    """Raised for malformed or incomplete configuration files."""


class TopologyParseError(SasimError):
    """Raised for malformed workload topology files."""


class ValidationError(SasimError):
    """Raised when parsed inputs violate a documented invariant."""


class SimulationError(SasimError):
    """Raised when a simulation stage cannot proceed."""
