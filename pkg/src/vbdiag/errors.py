"""Exception types shared across the package."""


class VbdiagError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(VbdiagError, ValueError):
    """A model parameter or function argument is outside its valid range."""


class GeometryError(VbdiagError):
    """Satellite geometry cannot support a position solution."""


class SkyplotFormatError(VbdiagError):
    """A skyplot file is malformed."""


class ScenarioError(VbdiagError):
    """A scenario file is malformed or violates a configuration invariant."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CalibrationError(VbdiagError):
    """Threshold regression cannot be fitted from the given points."""


class NoFailedRunsError(VbdiagError):
    """No run in the record set reached the positioning-failure level."""
