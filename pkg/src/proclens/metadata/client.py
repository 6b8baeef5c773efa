"""Metadata client: caching, rate limiting, retries and paging over a transport."""

from __future__ import annotations

import logging
import threading
import time
from collections import Counter
from typing import Any

from ..records import LinkedWork, PaperRecord, paper_from_api, work_from_api
from .cache import RequestCache
from .errors import NotFound, TransportError
from .ratelimit import TokenBucket

log = logging.getLogger(__name__)

SEARCH_FIELDS = "title,year,authors"
PAPER_FIELDS = ("title,year,authors,venue,publicationVenue,fieldsOfStudy,referenceCount,"
                "citationCount,influentialCitationCount,tldr,embedding")
LINK_FIELDS = "title,year,authors,venue,publicationVenue,fieldsOfStudy"
DIRECTIONS = ("references", "citations")
_LINK_KEY = {"references": "citedPaper", "citations": "citingPaper"}


class MetadataClient:
    """Blocking client shareable across threads.

    Identical requests are served from ``cache`` when one is given; every
    request that reaches the transport first takes a token from ``limiter``.
    """

    def __init__(self, transport, cache: RequestCache | None = None,
                 limiter: TokenBucket | None = None, max_retries: int = 3,
                 max_rate_retries: int = 8, backoff: float = 1.0, sleep=time.sleep):
        self.transport = transport
        self.cache = cache
        self.limiter = limiter
        self.max_retries = max_retries
        self.max_rate_retries = max_rate_retries
        self.backoff = backoff
        self._sleep = sleep
        self.stats: Counter = Counter()
        self._stats_lock = threading.Lock()

    def _count(self, key: str) -> None:
        with self._stats_lock:
            self.stats[key] += 1

    def _get(self, path: str, params: dict[str, Any]) -> Any:
        if self.cache is not None:
            body = self.cache.get(path, params)
            if body is not None:
                self._count("cache_hits")
                return body
        failures = rate_waits = 0
        while True:
            if self.limiter is not None:
                self.limiter.acquire()
            self._count("network_requests")
            log.debug("GET %s %s", path, params)
            try:
                resp = self.transport.get(path, params)
            except TransportError as exc:
                failures += 1
                if failures > self.max_retries:
                    raise
                log.warning("%s; retry %d/%d", exc, failures, self.max_retries)
                self._count("retries")
                self._sleep(self.backoff * 2 ** (failures - 1))
                continue
            if resp.status == 200:
                if self.cache is not None:
                    self.cache.put(path, params, resp.body)
                return resp.body
            if resp.status == 404:
                raise NotFound(f"{path}: not found")
            if resp.status == 429:
                rate_waits += 1
                if rate_waits > self.max_rate_retries:
                    raise TransportError(f"{path}: rate limited {rate_waits} times", status=429)
                wait = _retry_after(resp.headers, self.backoff * 2 ** (rate_waits - 1))
                log.warning("HTTP 429 on %s; waiting %.2fs (retry %d)", path, wait, rate_waits)
                self._count("retries")
                self._sleep(wait)
                continue
            if resp.status >= 500:
                failures += 1
                if failures > self.max_retries:
                    raise TransportError(f"{path}: HTTP {resp.status} after {self.max_retries} retries",
                                         status=resp.status)
                log.warning("HTTP %d on %s; retry %d/%d", resp.status, path, failures, self.max_retries)
                self._count("retries")
                self._sleep(self.backoff * 2 ** (failures - 1))
                continue
            raise TransportError(f"{path}: HTTP {resp.status}", retryable=False, status=resp.status)

    def search(self, query: str, limit: int = 10) -> list[PaperRecord]:
        if not query.strip():
            raise ValueError("empty search query")
        body = self._get("paper/search", {"query": query, "fields": SEARCH_FIELDS, "limit": limit})
        return [paper_from_api(d) for d in (body or {}).get("data") or []]

    def fetch_paper(self, paper_id: str, fields: str = PAPER_FIELDS) -> PaperRecord:
        if not paper_id:
            raise ValueError("empty paper id")
        return paper_from_api(self._get(f"paper/{paper_id}", {"fields": fields}))

    def fetch_links(self, paper_id: str, direction: str, page_size: int = 100) -> list[LinkedWork]:
        """Return every linked work across all pages, in backend order, duplicates kept."""
        if direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        if page_size < 1:
            raise ValueError("page_size must be >= 1")
        works: list[LinkedWork] = []
        offset = 0
        while True:
            params = {"fields": LINK_FIELDS, "offset": offset, "limit": page_size}
            try:
                body = self._get(f"paper/{paper_id}/{direction}", params)
            except TransportError as exc:
                raise TransportError(
                    f"{direction} of {paper_id} failed at offset {offset}; partial page set discarded: {exc}",
                    retryable=True, status=exc.status,
                ) from exc
            for item in body.get("data") or []:
                works.append(work_from_api(item.get(_LINK_KEY[direction]) or {}))
            nxt = body.get("next")
            if nxt is None:
                return works
            offset = int(nxt)

    def fetch_record(self, paper_id: str, page_size: int = 100) -> PaperRecord:
        """Paper metadata plus both link lists, with truncation flags set."""
        rec = self.fetch_paper(paper_id)
        rec.references = self.fetch_links(paper_id, "references", page_size)
        rec.citations = self.fetch_links(paper_id, "citations", page_size)
        rec.references_truncated = (rec.reference_count or 0) > len(rec.references)
        rec.citations_truncated = (rec.citation_count or 0) > len(rec.citations)
        return rec


def _retry_after(headers: dict[str, str], default: float) -> float:
    for k, v in (headers or {}).items():
        if k.lower() == "retry-after":
            try:
                return max(0.0, float(v))
            except ValueError:
                break
    return default
