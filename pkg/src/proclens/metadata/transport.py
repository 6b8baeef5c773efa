"""Backends that answer Graph-API style requests: the live HTTP service or a fixture directory."""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import TransportError

DEFAULT_BASE_URL = "https://api.semanticscholar.org/graph/v1"
API_KEY_ENV = "S2_API_KEY"


@dataclass
class Response:
    status: int
    body: Any = None
    headers: dict[str, str] = field(default_factory=dict)


class LiveTransport:
    def __init__(self, base_url: str = DEFAULT_BASE_URL, api_key: str | None = None,
                 timeout: float = 30.0, session=None):
        import requests

        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.timeout = timeout
        self.session = session or requests.Session()
        self._requests = requests

    def get(self, path: str, params: dict[str, Any]) -> Response:
        headers = {"x-api-key": self.api_key} if self.api_key else {}
        try:
            r = self.session.get(f"{self.base_url}/{path}", params=params,
                                 headers=headers, timeout=self.timeout)
        except self._requests.RequestException as exc:
            raise TransportError(f"GET {path}: {exc}") from exc
        try:
            body = r.json() if r.content else None
        except ValueError:
            body = None
        return Response(r.status_code, body, dict(r.headers))


_PAPER = re.compile(r"paper/([^/]+)$")
_LINKS = re.compile(r"paper/([^/]+)/(references|citations)$")
_LINK_KEY = {"references": "citedPaper", "citations": "citingPaper"}


def _normalize_query(q: str) -> str:
    return " ".join(q.split()).casefold()


def _select(doc: dict, fields: str | None) -> dict:
    if not fields:
        return {k: v for k, v in doc.items() if k in ("paperId", "title")}
    wanted = {f.strip() for f in fields.split(",")} | {"paperId"}
    return {k: v for k, v in doc.items() if k in wanted}


class FixtureTransport:
    """Serve requests from in-memory documents, emulating the live wire format.

    ``script`` is a list of HTTP status codes returned (with empty bodies) for
    the first requests before normal service begins; it exercises retry paths.
    """

    def __init__(self, papers: dict[str, dict], search_index: dict[str, list[str]],
                 script: list[int] | None = None):
        self.papers = papers
        self.index: dict[str, list[str]] = {}
        for q, ids in search_index.items():
            self.index.setdefault(_normalize_query(q), []).extend(ids)
        self.script = list(script or [])
        self.requests: list[tuple[str, dict]] = []
        self._lock = threading.Lock()

    @classmethod
    def from_directory(cls, directory: str | Path, script: list[int] | None = None) -> FixtureTransport:
        directory = Path(directory)
        papers = {}
        for p in sorted((directory / "papers").glob("*.json")):
            doc = json.loads(p.read_text(encoding="utf-8"))
            papers[doc["paperId"]] = doc
        index_path = directory / "search_index.json"
        index = json.loads(index_path.read_text(encoding="utf-8")) if index_path.exists() else {}
        return cls(papers, index, script)

    def get(self, path: str, params: dict[str, Any]) -> Response:
        with self._lock:
            self.requests.append((path, dict(params)))
            if self.script:
                return Response(self.script.pop(0), None, {"Retry-After": "0"})
        if path == "paper/search":
            ids = self.index.get(_normalize_query(params.get("query", "")), [])
            limit = int(params.get("limit", 10))
            data = [_select(self.papers[i], params.get("fields")) for i in ids[:limit] if i in self.papers]
            return Response(200, {"total": len(ids), "offset": 0, "data": data})
        m = _LINKS.match(path)
        if m:
            doc = self.papers.get(m.group(1))
            if doc is None:
                return Response(404, {"error": "Paper not found"})
            links = doc.get(m.group(2)) or []
            offset, limit = int(params.get("offset", 0)), int(params.get("limit", 100))
            key = _LINK_KEY[m.group(2)]
            data = [{key: _select(w, params.get("fields"))} for w in links[offset: offset + limit]]
            body = {"offset": offset, "data": data}
            if offset + limit < len(links):
                body["next"] = offset + limit
            return Response(200, body)
        m = _PAPER.match(path)
        if m:
            doc = self.papers.get(m.group(1))
            if doc is None:
                return Response(404, {"error": "Paper not found"})
            return Response(200, _select(doc, params.get("fields")))
        return Response(404, {"error": f"unknown endpoint {path}"})
