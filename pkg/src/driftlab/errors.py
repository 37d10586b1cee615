"""Exception types; each maps to a process exit status in the CLI."""


class DriftLabError(Exception):
    exit_status = 1


class ConfigError(DriftLabError, ValueError):
    """Invalid parameters or configuration file."""

    exit_status = 2


class PropertyViolation(DriftLabError):
    """A uniform bound or structural property failed on a sampled point."""

    exit_status = 3

    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending or []


class CalibrationError(DriftLabError):
    """Calibration constants are degenerate or mutually inconsistent."""

    exit_status = 3


class NumericalFailure(DriftLabError):
    """Non-finite state in a simulation."""

    exit_status = 4

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DomainError(DriftLabError, ValueError):
    """Argument outside the domain where a formula is defined."""

    exit_status = 2
