"""Exception hierarchy shared by every module."""


class MoranError(Exception):
    """Base class for all library errors."""


class ConfigError(MoranError, ValueError):
    """A system declaration or parameter is malformed.

    ``pointer`` is a JSON pointer (RFC 6901) to the offending field, or an
    empty string for the document root.
    """

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        self.message = message
        super().__init__(f"{pointer or '/'}: {message}")


class InvariantError(MoranError):
    """A structural invariant of a system was violated."""


class ProviderRangeError(MoranError):
    """A layer beyond what the provider can represent was requested."""


class UnsupportedCompositionError(MoranError):
    """A composition leaves the supported map classes (e.g. rotation with anisotropy)."""


class UnsupportedGeometryError(MoranError):
    """A box image is not an axis-aligned box."""


class CutsetLimitError(MoranError):
    """Cutset enumeration exceeded its word budget.

    ``count`` is the number of words produced before the guard tripped.
    """

    def __init__(self, count: int, limit: int, b: float):
        self.count = count
        self.limit = limit
        self.b = b
        super().__init__(f"cutset at b={b:.6g} exceeds limit {limit} (reached {count} words)")


class GuardError(MoranError):
    """A numeric guard tripped; ``guard`` names it."""

    def __init__(self, guard: str, message: str):
        self.guard = guard
        super().__init__(f"{guard}: {message}")
