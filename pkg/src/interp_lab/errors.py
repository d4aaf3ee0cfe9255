"""Exception types raised across the package."""


class InterpLabError(Exception):
    """Base class for all package errors."""


class GridMismatch(InterpLabError, ValueError):
    pass


class OutOfGrid(InterpLabError, ValueError):
    pass


class AtNode(InterpLabError, ValueError):
    pass


class UnstableConfig(InterpLabError, RuntimeError):
    pass


class LobesNotSeparated(InterpLabError, ValueError):
    pass


class TooFewJumps(InterpLabError, ValueError):
    pass


class BranchesOverlap(InterpLabError, ValueError):
    pass


class NotUnitary(InterpLabError, ValueError):
    pass


class UnknownLabel(InterpLabError, KeyError):
    pass


class UnsupportedState(InterpLabError, ValueError):
    pass


class OutOfRange(InterpLabError, ValueError):
    pass


class IncompatibleRuns(InterpLabError, ValueError):
    pass


class ConfigError(InterpLabError, ValueError):
    """Configuration failed schema validation; ``path`` names the JSON location."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path
