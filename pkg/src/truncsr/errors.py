class ShapeMismatchError(ValueError):
    pass


class TimestepRangeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    """A state, loss or metric became NaN or infinite."""


class DivergenceError(NonFiniteError):
    pass


class StaleCacheError(RuntimeError):
    pass


class FreezeViolationError(RuntimeError):
    pass


class InsufficientRunsError(ValueError):
    pass


class ImageTooSmallError(ValueError):
    pass


class MissingDependencyError(RuntimeError):
    """A pipeline stage was requested before the stage it depends on."""
