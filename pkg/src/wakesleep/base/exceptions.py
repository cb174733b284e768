"""
Custom exceptions for the wakesleep training engine.
"""


class WakeSleepError(Exception):
    """Base exception for all engine errors."""

    def __init__(self, message: str, code: str = None, details: dict = None):
        self.message = message
        self.code = code or "WAKESLEEP_ERROR"
        self.details = details or {}
        super().__init__(self.message)


class ContractViolation(WakeSleepError):
    """Raised when an operation is called outside its preconditions."""

    def __init__(self, message: str = "Contract violation", details: dict = None):
        super().__init__(message, code="CONTRACT_VIOLATION", details=details)


class NumericFault(WakeSleepError):
    """Raised when a NaN or infinity shows up where a finite value is required."""

    def __init__(
        self,
        message: str = "Numeric fault",
        op: str = None,
        checkpoint_path: str = None,
        details: dict = None,
        code: str = "NUMERIC_FAULT",
    ):
        self.op = op
        self.checkpoint_path = checkpoint_path
        details = dict(details or {})
        if op is not None:
            details.setdefault("op", op)
        if checkpoint_path is not None:
            details.setdefault("checkpoint_path", checkpoint_path)
        super().__init__(message, code=code, details=details)


class DegenerateWeightsError(NumericFault):
    """Raised when every importance weight of a particle set is zero."""

    def __init__(self, message: str = "All log-weights are -inf", details: dict = None):
        super().__init__(message, details=details, code="DEGENERATE_WEIGHTS")


class ConfigurationError(WakeSleepError):
    """Raised when configuration is missing or invalid."""

    def __init__(self, message: str = "Configuration error", details: dict = None):
        super().__init__(message, code="CONFIGURATION_ERROR", details=details)


class DataFormatError(WakeSleepError):
    """Raised when a data or archive file does not match its format."""

    def __init__(
        self, message: str = "Malformed data file", offset: int = None, details: dict = None
    ):
        self.offset = offset
        details = dict(details or {})
        if offset is not None:
            details.setdefault("offset", offset)
        super().__init__(message, code="DATA_FORMAT_ERROR", details=details)


class CheckpointError(WakeSleepError):
    """Raised when a checkpoint cannot be restored."""

    def __init__(self, message: str = "Checkpoint error", details: dict = None):
        super().__init__(message, code="CHECKPOINT_ERROR", details=details)


class DownloadError(WakeSleepError):
    """Raised when fetching a dataset archive fails."""

    def __init__(
        self,
        message: str = "Download failed",
        status_code: int = None,
        details: dict = None,
    ):
        self.status_code = status_code
        super().__init__(message, code="DOWNLOAD_ERROR", details=details)
