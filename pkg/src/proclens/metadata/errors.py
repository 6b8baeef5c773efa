class MetadataError(Exception):
    """Base class for backend failures."""


class NotFound(MetadataError):
    """The backend has no record for the requested id."""


class TransportError(MetadataError):
    """The request could not be completed; ``retryable`` marks transient causes."""

    def __init__(self, message: str, retryable: bool = True, status: int | None = None):
        super().__init__(message)
        self.retryable = retryable
        self.status = status
