"""Exception hierarchy shared by all posechain modules."""


class PosechainError(Exception):
    """Base class for every error raised by posechain."""


class DimensionMismatch(PosechainError, ValueError):
    pass


class NonPositiveDepth(PosechainError, ValueError):
    """A point lies on or behind the camera plane."""


class NoConvergence(PosechainError, RuntimeError):
    pass


class DegenerateConfiguration(PosechainError, ValueError):
    """Too few or geometrically degenerate correspondences for resection."""


class InsufficientMotion(PosechainError, ValueError):
    """Relative robot rotations do not span enough axes for AX = XB."""


class SingularNormalEquations(PosechainError, RuntimeError):
    pass


class EmptyInput(PosechainError, ValueError):
    pass


class MissingPose(PosechainError, KeyError):
    pass


class UnknownPointId(PosechainError, KeyError):
    pass


class DegenerateGeometry(PosechainError, ValueError):
    pass


class NoSharedFrames(PosechainError, ValueError):
    pass


class GroupTooSmall(PosechainError, ValueError):
    pass


class ImageTooSmall(PosechainError, ValueError):
    pass


class EmptyStack(PosechainError, ValueError):
    pass


class StackTooSmall(PosechainError, ValueError):
    pass


class EmptyRange(PosechainError, ValueError):
    pass


class DegenerateUp(PosechainError, ValueError):
    pass


class ParseError(PosechainError, ValueError):
    """Malformed input file; the message names the offending line or row."""


class MissingImage(PosechainError, FileNotFoundError):
    pass


class ConfigError(PosechainError, ValueError):
    pass
