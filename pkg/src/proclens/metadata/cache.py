"""Read-through request cache: one JSON file per (endpoint, params) hash."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
from pathlib import Path
from typing import Any

log = logging.getLogger(__name__)


def request_key(endpoint: str, params: dict[str, Any]) -> str:
    canon = json.dumps([endpoint, {k: str(v) for k, v in params.items()}],
                       sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


class RequestCache:
    def __init__(self, directory: str | Path, refresh: bool = False):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.refresh = refresh
        self._lock = threading.Lock()

    def path(self, endpoint: str, params: dict[str, Any]) -> Path:
        return self.directory / f"{request_key(endpoint, params)}.json"

    def get(self, endpoint: str, params: dict[str, Any]) -> Any | None:
        if self.refresh:
            return None
        p = self.path(endpoint, params)
        with self._lock:
            if not p.exists():
                return None
            try:
                doc = json.loads(p.read_text(encoding="utf-8"))
                return doc["body"]
            except (ValueError, KeyError, TypeError, UnicodeDecodeError):
                log.warning("corrupt cache entry %s evicted", p.name)
                p.unlink(missing_ok=True)
                return None

    def put(self, endpoint: str, params: dict[str, Any], body: Any) -> None:
        p = self.path(endpoint, params)
        payload = json.dumps({"endpoint": endpoint, "params": params, "body": body},
                             sort_keys=True, ensure_ascii=False)
        with self._lock:
            fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(payload)
            os.replace(tmp, p)
