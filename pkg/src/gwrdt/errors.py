"""Exception hierarchy shared by all gwrdt modules."""


class GWError(Exception):
    """Base class for every error raised by gwrdt."""


class InvalidSymbol(GWError):
    pass


class InvalidParameter(GWError):
    pass


class ConfigError(GWError):
    """Model, distortion or run config could not be parsed."""


class StochasticityViolation(GWError):
    pass


class CriticalityViolation(GWError):
    pass


class InvalidTree(GWError):
    pass


class NoSuchSize(GWError):
    pass


class ConditioningFailed(GWError):
    def __init__(self, msg, attempts=0, accepted=0):
        super().__init__(msg)
        self.attempts = attempts
        self.accepted = accepted


class CountExceeded(GWError):
    pass


class SizeMismatch(GWError):
    pass


class AlphabetMismatch(GWError):
    pass


class NoConvergence(GWError):
    def __init__(self, msg, residual=float("nan")):
        super().__init__(msg)
        self.residual = residual


class DegenerateMatrix(GWError):
    pass


class NotCritical(GWError):
    pass


class OptFailed(GWError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best
