"""Exception types raised across the package."""


class StoptimeError(Exception):
    """Base class for all package errors."""


class EnumerationTooLarge(StoptimeError):
    pass


class UnsupportedDepth(StoptimeError):
    """A requested engine is not available at this depth/base combination."""


class UnsupportedSpace(StoptimeError):
    pass


class TruncationMismatch(StoptimeError):
    pass


class UnverifiedEmbedding(StoptimeError):
    pass


class DiagonalBelowDelta(StoptimeError):
    """Raised when some diagonal entry of an operator is smaller than delta in absolute value."""

    def __init__(self, message, node=None, value=None):
        super().__init__(message)
        self.node = node
        self.value = value


class InvalidInput(StoptimeError):
    pass
