"""Exception hierarchy shared by every blindssr module."""


class BlindSSRError(Exception):
    """Base class for all errors raised by blindssr."""


class DomainError(BlindSSRError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class InsufficientDataError(BlindSSRError, ValueError):
    """Too few observations for the requested estimator or rule."""


class NumericError(BlindSSRError, ArithmeticError):
    """A numerical routine failed to converge.

    ``diagnostics`` carries whatever the routine knew at the time of failure
    (interval counts, last error estimate, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class CalibrationInfeasibleError(BlindSSRError):
    """The target power cannot be reached inside the confidence bracket."""


class ConsistencyError(BlindSSRError, ValueError):
    """Two inputs describing the same quantity disagree."""


class ValidationError(BlindSSRError, ValueError):
    """A run configuration failed validation.

    All violations are collected in ``problems`` so they can be reported at once.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
