"""Exception hierarchy shared by the library and the command line."""


class InterfaceMapError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(InterfaceMapError, ValueError):
    """Invalid problem description or run configuration."""

    exit_code = 2

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NumericalError(InterfaceMapError, ArithmeticError):
    """A computation could not reach its stated accuracy."""

    exit_code = 3


class PoleProximityError(NumericalError):
    """The integration contour passes too close to a zero of the system determinant."""

    exit_code = 4


class SingularStructureError(NumericalError):
    """A row of an assembled system is identically zero."""
