"""Error taxonomy shared across the toolkit.

Exit-code classes for the CLI: usage/config problems map to 1, bad or
inconsistent data to 2, numeric failures during training to 3.
"""


class FloorgenError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 2


class ConfigError(FloorgenError):
    """Invalid configuration value or combination."""

    exit_code = 1


class ParseError(FloorgenError):
    """Malformed input file; message carries line/field diagnostics."""


class DimensionMismatch(FloorgenError):
    """Two grids that must share dimensions do not."""


class DimensionError(FloorgenError):
    """A tensor shape violates an operation's contract."""


class AllWallError(FloorgenError):
    """Boundary raster contains no open pixel at all."""


class NoInteriorError(FloorgenError):
    """No enclosed interior region exists (open or blank boundary)."""


class InvalidPolygon(FloorgenError):
    """Polygon with <3 vertices, self-intersections, or zero area."""


class UnknownClassId(FloorgenError):
    """Label value or color has no palette entry."""


class InvalidGraph(FloorgenError):
    """Layout graph failed validation; message lists the violations."""


class ClassOutOfRange(FloorgenError):
    """Label grid contains values outside [0, num_classes)."""


class MissingTargetError(FloorgenError):
    """Evaluation requires a ground-truth target the sample lacks."""


class NoScoredPixels(FloorgenError):
    """Confusion matrix is empty; no metric is defined."""


class EmptyMaskError(FloorgenError):
    """Loss mask excludes every pixel."""


class NonFiniteLossError(FloorgenError):
    """Training produced NaN/Inf; message names the first bad tensor."""

    exit_code = 3


class CorruptCheckpointError(FloorgenError):
    """Checkpoint file is truncated, checksum-invalid, or unknown version."""


class ShapeMismatchError(FloorgenError):
    """Checkpoint tensors do not match the model configuration."""
