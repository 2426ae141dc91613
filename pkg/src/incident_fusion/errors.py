"""Exception types raised across the package.

Every error derives from :class:`IncidentFusionError` and from the closest
builtin, so callers can catch either. The CLI maps them to exit codes.
"""


class IncidentFusionError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class SchemaError(IncidentFusionError, ValueError):
    """A required input column is missing."""

    exit_code = 2

    def __init__(self, column: str, source: str = "input"):
        self.column = column
        super().__init__(f"{source} is missing required column '{column}'")


class ConfigurationError(IncidentFusionError, ValueError):
    exit_code = 2


class ExtractionError(IncidentFusionError, LookupError):
    """A detector window has a missing 5-minute slot."""

    exit_code = 2

    def __init__(self, station_id: str, missing_slot: int):
        self.station_id = station_id
        self.missing_slot = missing_slot
        super().__init__(
            f"station {station_id} has no reading for slot {missing_slot}"
        )


class DimensionError(IncidentFusionError, ValueError):
    exit_code = 4


class EncodingError(IncidentFusionError, ValueError):
    exit_code = 2


class InsufficientDataError(IncidentFusionError, ValueError):
    exit_code = 2


class SingularMatrixError(IncidentFusionError, ArithmeticError):
    """The least-squares design matrix is rank deficient."""

    exit_code = 4

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"design matrix is rank deficient at column '{column}'")


class MetricError(IncidentFusionError, ValueError):
    exit_code = 4


class FoldError(IncidentFusionError, RuntimeError):
    """A model failed to fit inside a cross-validation fold."""

    exit_code = 4

    def __init__(self, fold: int, cause: Exception):
        self.fold = fold
        self.cause = cause
        super().__init__(f"fold {fold}: {cause}")


class MissingArtifactError(IncidentFusionError, FileNotFoundError):
    """An upstream cache file needed by a command does not exist."""

    exit_code = 3

    def __init__(self, artifact: str, hint: str = ""):
        self.artifact = artifact
        message = f"missing artifact: {artifact}"
        if hint:
            message += f" (run `{hint}` first)"
        super().__init__(message)


class NumericalError(IncidentFusionError, ArithmeticError):
    exit_code = 4
