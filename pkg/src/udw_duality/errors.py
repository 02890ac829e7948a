"""Exception hierarchy shared by all modules."""


class UDWError(Exception):
    """Base class for errors raised by udw_duality."""


class InvalidSpecError(UDWError, ValueError):
    pass


class InvalidRegulatorError(UDWError, ValueError):
    pass


class NumericalError(UDWError, ArithmeticError):
    """Quadrature did not converge. ``estimate`` carries the error estimate."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class CrossValidationError(UDWError, ArithmeticError):
    """Two independent evaluation routes disagree."""

    def __init__(self, message, first=None, second=None):
        super().__init__(message)
        self.first = first
        self.second = second


class AppendixConsistencyError(CrossValidationError):
    """Direct and integrated-by-parts derivative M terms disagree."""

    def __init__(self, message, direct=None, by_parts=None, remnant=None):
        super().__init__(message, direct, by_parts)
        self.direct = direct
        self.by_parts = by_parts
        self.remnant = remnant


class PerturbativeValidityError(UDWError, ValueError):
    pass


class DegenerateProbabilityError(UDWError, ArithmeticError):
    pass


class ConfigurationError(UDWError, ValueError):
    pass
