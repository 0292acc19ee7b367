"""Exception hierarchy shared by all ewslab modules."""


class EwsLabError(Exception):
    """Base class for all library errors."""


class NumericalError(EwsLabError):
    """Numerical failure (CLI exit code 3)."""


class DegenerateRate(NumericalError, ValueError):
    pass


class NegativeLag(EwsLabError, ValueError):
    pass


class SingularCovariance(NumericalError):
    pass


class ZeroSigmaY(NumericalError, ValueError):
    pass


class PreconditionViolated(EwsLabError, ValueError):
    pass


class NonFiniteState(NumericalError):
    """Integration left the admissible box; the truncated path is attached."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


class EmptyAnalysisWindow(EwsLabError):
    pass


class SeriesTooShort(EwsLabError, ValueError):
    pass


class ZeroVariance(NumericalError):
    pass


class DegenerateBins(NumericalError):
    pass


class FitDegenerate(NumericalError):
    pass


class ConfigError(EwsLabError):
    """Configuration problem (CLI exit code 2)."""


class ParseError(ConfigError):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class ValidationError(ConfigError, ValueError):
    pass
