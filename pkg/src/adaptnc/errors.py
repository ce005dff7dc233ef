"""Exception hierarchy shared across the package."""


class AdaptncError(Exception):
    """Base class for all package errors."""


class InvalidInput(AdaptncError, ValueError):
    pass


class EmptyWindow(AdaptncError):
    pass


class DegenerateInput(AdaptncError):
    """Point set is collinear or too small to span a 2-D hull."""


class DegenerateGeometry(AdaptncError):
    """Halfspace intersection collapsed where a bounded region was expected."""


class InsufficientCalibration(AdaptncError):
    pass


class InsufficientHistory(AdaptncError):
    pass


class StreamExhausted(AdaptncError, StopIteration):
    pass


class EmptyRun(AdaptncError):
    pass


class WindowTooLarge(AdaptncError):
    pass


class MissingRuns(AdaptncError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        cells = ", ".join(f"({m}, {e})" for m, e in self.missing)
        super().__init__(f"missing runs for (method, env): {cells}")


class ConfigError(AdaptncError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
