"""Exception hierarchy shared by all modules."""


class TwoTimeError(Exception):
    """Base class for domain errors raised by this package."""


class DimensionError(TwoTimeError, ValueError):
    pass


class NumericalError(TwoTimeError, ArithmeticError):
    pass


class TimeRangeError(TwoTimeError, ValueError):
    pass


class OrthogonalSelectionError(TwoTimeError, ZeroDivisionError):
    """Pre- and post-selected states are (numerically) orthogonal."""


class ImpossibleHistoryError(TwoTimeError):
    """No outcome of the measured decomposition is compatible with both selections."""


class SpectrumError(TwoTimeError, ValueError):
    pass


class EmptyEnsembleError(TwoTimeError):
    """No Monte Carlo trial survived post-selection."""

    def __init__(self, total_trials, message=None):
        self.total_trials = int(total_trials)
        super().__init__(message or f"no trial post-selected out of {self.total_trials}")


class GridError(TwoTimeError, ValueError):
    pass


class ValidationError(TwoTimeError, ValueError):
    pass


class ParseError(TwoTimeError, ValueError):
    """Malformed scenario document; ``path`` names the offending field."""

    def __init__(self, path, reason):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


class LowStatisticsWarning(UserWarning):
    pass
