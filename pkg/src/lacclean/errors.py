"""Exception types shared across the package."""


class LacCleanError(Exception):
    """Base class for all lacclean errors."""


class MalformedRow(LacCleanError):
    """A CSV row (or header) that violates the file format.

    Carries the 1-based line number so CLI diagnostics can point at the
    offending line.
    """

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class EmptyInput(LacCleanError):
    """An operation that requires at least one element got none."""


class AntimeridianSpread(LacCleanError):
    """Points span more than 180 degrees of unwrapped longitude."""


class EmptyGroup(LacCleanError):
    """A LAC group with no members was passed to clustering."""


class MismatchedInput(LacCleanError):
    """A dendrogram and group that do not belong together."""


class OrderingViolation(LacCleanError):
    """Counts that violate retained <= resolved <= total."""


class WorldMismatch(LacCleanError):
    """A clean result references cells absent from the synthetic world."""


class RegionTooSmall(LacCleanError):
    """LAC center placement could not satisfy the separation constraint."""
