"""Exception hierarchy shared across the package."""


class ReliKError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(ReliKError, ValueError):
    """A malformed input document."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = []
        if source is not None:
            where.append(source)
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.message = message


class DomainError(ReliKError, ValueError):
    """An argument outside the domain of an operation."""


class ConfigurationError(ReliKError, ValueError):
    """Incompatible or invalid configuration."""


class SamplingError(ReliKError, RuntimeError):
    """A sampler could not produce the requested sample."""


class TruncationError(ReliKError, RuntimeError):
    """A bounded procedure ran out of budget; ``partial`` holds what it built."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class DivergenceError(ReliKError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch
