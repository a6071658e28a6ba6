"""Exception hierarchy shared by all convae modules."""


class ConvaeError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(ConvaeError):
    """Tensor shapes are incompatible for the requested operation."""


class SizeOverflowError(ConvaeError):
    """Requested tensor would exceed the platform index range."""


class NetspecError(ConvaeError):
    """Network description text is invalid.

    Carries the 1-based line and column of the offending token when known.
    """

    def __init__(self, message, line=None, column=None):
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{where}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


class GeometryError(ConvaeError):
    """Layer geometry is impossible (kernel too large, element counts differ)."""


class AuditError(ConvaeError):
    """Parameter audit cannot be computed for this network."""


class DomainError(ConvaeError):
    """A value lies outside the mathematically required domain."""


class ConfigError(ConvaeError):
    """Invalid or inconsistent run configuration."""


class IngestionError(ConvaeError):
    """Dataset file is malformed; names the file and byte offset."""

    def __init__(self, path, offset, message):
        super().__init__(f"{path} (offset {offset}): {message}")
        self.path = str(path)
        self.offset = offset


class PairingError(ConvaeError):
    """Checkpoint and network description do not belong together."""


class SaturationAbort(ConvaeError):
    """Training aborted: non-finite values or saturated activations.

    ``layer`` names the first offending node; ``report_path`` points at the
    min/max dump written before aborting (may be None for in-memory runs).
    """

    def __init__(self, layer, message, report_path=None):
        super().__init__(f"{layer}: {message}")
        self.layer = layer
        self.reason = message
        self.report_path = report_path
