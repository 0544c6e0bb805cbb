"""Exception hierarchy shared by all analysis modules."""


class CryptoFactsError(Exception):
    """Base class for every error raised by this package."""


class ParseError(CryptoFactsError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IntegrityError(CryptoFactsError):
    pass


class DomainError(CryptoFactsError, ValueError):
    pass


class DegenerateSeriesError(CryptoFactsError, ValueError):
    pass


class AlignmentError(CryptoFactsError):
    pass


class SpecError(CryptoFactsError, ValueError):
    """Invalid generator or configuration parameters."""


class InsufficientDataError(CryptoFactsError, ValueError):
    pass


class FitError(CryptoFactsError):
    pass


class SpectrumError(CryptoFactsError):
    pass


class MissingEntryError(CryptoFactsError):
    """Raised when a correlation/distance matrix has undefined entries."""

    def __init__(self, message, pairs=()):
        super().__init__(message)
        self.pairs = list(pairs)
