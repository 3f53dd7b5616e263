"""Exception hierarchy shared across the package."""


class EchogradError(Exception):
    """Base class for package-specific failures."""


class ConfigError(EchogradError):
    """Invalid configuration file, flag combination, or model descriptor."""


class NumericalError(EchogradError):
    """Base class for failures of the numerical machinery."""


class DivergenceError(NumericalError):
    """A state became non-finite during integration or relaxation."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class ConvergenceError(NumericalError):
    """An iterative solver exhausted its budget before reaching tolerance."""


class SingularHessianError(NumericalError):
    """A velocity or momentum Hessian could not be inverted."""
