"""Exception hierarchy shared across the package."""


class TuringLabError(Exception):
    """Base class for all package errors."""


class ConfigError(TuringLabError):
    """Invalid or inconsistent configuration."""


# kinetics
class NoConvergence(TuringLabError):
    pass


class SingularJacobian(NoConvergence):
    """Newton matrix numerically singular. Subclasses NoConvergence: no root was found."""


class DerivativeMismatch(TuringLabError):
    pass


# linear analysis
class AnalysisError(TuringLabError):
    pass


class EqualDiffusivities(AnalysisError):
    pass


class NotRestStable(AnalysisError):
    pass


class NoTuringInstability(AnalysisError):
    pass


class ZeroFv(AnalysisError):
    pass


# spectral
class DegenerateBasis(TuringLabError):
    pass


# simulator
class NumericalFailure(TuringLabError):
    pass


class ValidityExceeded(NumericalFailure):
    pass


class NonFinite(NumericalFailure):
    pass


class UnstableTimeStep(ConfigError):
    pass


# verification
class BadOrder(TuringLabError):
    pass


class InsufficientData(TuringLabError):
    pass


class NonNegativeGv(TuringLabError):
    pass
