"""Exception hierarchy shared by every stage of the pipeline."""


class RespireError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(RespireError):
    """Malformed container (bad RIFF/WAVE header, truncated chunk)."""


class UnsupportedError(RespireError):
    """Well-formed input using an encoding this package does not decode."""


class EmptyInputError(RespireError):
    pass


class AllSilentError(RespireError):
    """Every frame of the clip falls below the silence threshold."""

    def __init__(self, message, source_id=""):
        super().__init__(message)
        self.source_id = source_id


class ParameterError(RespireError, ValueError):
    pass


class SchemaError(RespireError):
    pass


class IngestError(RespireError):
    """Manifest or batch ingestion failure; ``rows`` names the offenders."""

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = list(rows)


class PairingError(RespireError):
    pass


class DegenerateLabelsError(RespireError):
    pass


class FoldError(RespireError):
    pass


class MetricError(RespireError):
    pass


class DegenerateVarianceError(RespireError):
    pass
