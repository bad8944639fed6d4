"""Exception hierarchy shared by all circlekit modules."""


class CircleKitError(Exception):
    """Base class for every error raised by circlekit."""


class InvalidArgumentError(CircleKitError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateGeometryError(CircleKitError):
    """The input geometry admits no well-posed answer (e.g. collinear points)."""


class DegenerateFitError(DegenerateGeometryError):
    """A circle fit has no acceptable solution."""


class DegenerateCircleError(DegenerateGeometryError):
    """An algebraic solution does not describe a real circle (line or imaginary)."""


class InvalidSpecError(InvalidArgumentError):
    """A scene specification is internally inconsistent."""


class PointCloudParseError(CircleKitError):
    """A point-cloud file is malformed; carries the path and 1-based line number."""

    def __init__(self, path, line_number: int, message: str):
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = str(path)
        self.line_number = line_number


class FormatError(CircleKitError):
    """A side file (weights, labels, instances) disagrees with the data it describes."""
