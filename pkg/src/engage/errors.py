"""Exception and warning types shared across the package."""

from __future__ import annotations


class EngageError(Exception):
    """Base class for all errors raised by this package."""


class MissingJoint(EngageError, KeyError):
    """A pose does not contain a joint that the caller requires."""

    def __init__(self, joint: str, where: str = "pose"):
        self.joint = joint
        super().__init__(f"joint {joint!r} missing from {where}")

    def __str__(self) -> str:
        return self.args[0]


class TopologyError(EngageError, ValueError):
    """A skeleton parent relation is not a single-rooted tree."""


class DegenerateBone(EngageError, ValueError):
    """A bone or link is too short to define a direction."""


class DegenerateBoneWarning(UserWarning):
    """Emitted when a joint rotation falls back because its bones are too short."""


class GimbalLockWarning(UserWarning):
    """Emitted when an Euler decomposition hits the pitch = +-pi/2 singularity."""


class NonMonotonicTimestamp(EngageError, ValueError):
    """A timestamp did not strictly increase."""


class ParseError(EngageError, ValueError):
    """Malformed input file; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class ChannelMismatch(ParseError):
    """A BVH motion row has a different number of values than declared channels."""


class TopologyMismatch(EngageError, ValueError):
    """The joint set of a pose stream changed mid-stream."""


class ModelError(EngageError, ValueError):
    """One validation problem in a robot model document.

    ``field`` is a dotted path to the offending entry, e.g. ``joints[2].limits_radians``.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class SchemaError(ModelError):
    pass


class CycleError(ModelError):
    pass


class LimitOrderError(ModelError):
    pass


class ModelValidationError(EngageError, ValueError):
    """Raised by ``load_model`` with every problem found, not just the first."""

    def __init__(self, errors: list[ModelError]):
        self.errors = list(errors)
        lines = "\n".join(f"  - {type(e).__name__}: {e}" for e in self.errors)
        super().__init__(f"{len(self.errors)} validation error(s):\n{lines}")


class EmptyTrace(EngageError, ValueError):
    """Metrics were requested for a trace with no frames."""


class EngineError(EngageError):
    """A module error raised while processing a given input frame."""

    def __init__(self, frame_index: int, cause: BaseException):
        self.frame_index = frame_index
        self.cause = cause
        super().__init__(f"frame {frame_index}: {type(cause).__name__}: {cause}")
