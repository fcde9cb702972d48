"""Exception hierarchy shared by the simulation, estimation and CLI layers."""


class MixedModelError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class ParameterError(MixedModelError, ValueError):
    """A parameter lies outside its admissible domain (H, a, b, T, orders...)."""

    exit_code = 2


class ResolutionError(MixedModelError, ValueError):
    """The observed path is too coarse for the requested dyadic level."""

    exit_code = 3


class LevelError(MixedModelError, LookupError):
    """A variation ladder does not contain a requested level."""

    exit_code = 3


class EmbeddingError(MixedModelError, RuntimeError):
    """Circulant embedding produced a genuinely negative eigenvalue."""

    exit_code = 2


class RegimeError(MixedModelError, ValueError):
    """A limit law or estimator was requested outside the regime where it holds."""

    exit_code = 5


class UndefinedEstimateError(MixedModelError, ArithmeticError):
    """An estimator hits a pole of its formula (e.g. a denominator vanishes)."""

    exit_code = 2


class InconclusiveError(MixedModelError, RuntimeError):
    """No admissible data remained to form an estimate."""

    exit_code = 5


class FormatError(MixedModelError, ValueError):
    """Malformed input file."""

    exit_code = 4

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
