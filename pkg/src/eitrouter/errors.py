"""Exception types shared across the package."""


class RouterError(Exception):
    """Base class for all package errors."""


class ConfigError(RouterError, ValueError):
    """Invalid configuration or input data."""


class DegenerateElementError(RouterError, ArithmeticError):
    """A scatterer with vanishing transmission has no transfer-matrix form."""


class ResonantDivergenceError(RouterError, ArithmeticError):
    """The multiple-reflection denominator of a star product vanished."""


class NumericalError(RouterError, ArithmeticError):
    """Non-finite values appeared during a chain or ensemble evaluation."""


class FitError(RouterError, RuntimeError):
    """A least-squares fit did not converge or was ill-posed.

    ``report`` carries whatever diagnostics were available when the fit
    stopped (residual norm, iteration count, last parameters).
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class GridSpanError(ConfigError):
    """The pulse frequency grid cannot represent the requested pulse."""

    def __init__(self, message, required_span_mhz):
        super().__init__(message)
        self.required_span_mhz = required_span_mhz
