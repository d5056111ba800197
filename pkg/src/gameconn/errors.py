"""Exception types raised by the library."""


class GameconnError(Exception):
    """Base class for all library errors."""


class InvalidShape(GameconnError, ValueError):
    pass


class ShapeTooLarge(GameconnError, ValueError):
    """A shape exceeds a configured vertex, storage or enumeration cap."""


class InvalidProfile(GameconnError, ValueError):
    pass


class InvalidLine(GameconnError, ValueError):
    pass


class InvalidGame(GameconnError, ValueError):
    """Malformed game data, including ties within a line."""


class UseImplicit(ShapeTooLarge):
    """Explicit storage was requested for a graph above the explicit cap."""


class ConditioningTimeout(GameconnError, RuntimeError):
    """Rejection sampling gave up after ``max_rejections`` draws."""

    def __init__(self, message: str, rejections: int):
        super().__init__(message)
        self.rejections = rejections
