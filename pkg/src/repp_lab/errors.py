"""Exception hierarchy shared by all modules."""


class ReppError(Exception):
    """Base class for every error raised by repp_lab."""


class DomainError(ReppError, ValueError):
    """Input outside the mathematical domain of an operation."""


class ResolutionError(ReppError):
    """Digit resolution needed exceeds the configured hard cap."""


class UnsupportedOperation(ReppError, NotImplementedError):
    pass


class IntervalCapError(ReppError):
    """Interval iteration exceeded the component cap.

    ``partial`` holds whatever was computed before the cap was hit.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class QSelectionError(ReppError):
    def __init__(self, message, profile=None):
        super().__init__(message)
        self.profile = profile


class StateError(ReppError):
    pass


class ConfigError(ReppError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnderpoweredError(ReppError):
    """Too few samples for the requested test."""


class DataError(ReppError, ValueError):
    pass
