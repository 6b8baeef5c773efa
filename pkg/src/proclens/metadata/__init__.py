"""Scholarly-metadata access: transports, cache, rate limiting and the client."""

from pathlib import Path

from .cache import RequestCache
from .client import DIRECTIONS, MetadataClient
from .errors import MetadataError, NotFound, TransportError
from .ratelimit import TokenBucket
from .transport import FixtureTransport, LiveTransport, Response


def make_transport(backend: str):
    """Build a transport from ``live`` or ``fixture:<dir>``."""
    if backend == "live":
        return LiveTransport()
    if backend.startswith("fixture:"):
        directory = Path(backend.split(":", 1)[1])
        if not (directory / "papers").is_dir():
            raise FileNotFoundError(f"fixture backend {directory} has no papers/ directory")
        return FixtureTransport.from_directory(directory)
    raise ValueError(f"unknown backend {backend!r}; use 'live' or 'fixture:<dir>'")


__all__ = [
    "DIRECTIONS", "FixtureTransport", "LiveTransport", "MetadataClient", "MetadataError",
    "NotFound", "RequestCache", "Response", "TokenBucket", "TransportError", "make_transport",
]
