"""Paper and linked-work records as returned by the metadata backend."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, NamedTuple

EMBEDDING_DIM = 768


class Author(NamedTuple):
    name: str
    author_id: str | None


@dataclass
class LinkedWork:
    work_id: str
    title: str = ""
    authors: list[Author] = field(default_factory=list)
    year: int | None = None
    venue: str | None = None
    venue_type: str | None = None
    fields_of_study: list[str] = field(default_factory=list)


@dataclass
class PaperRecord:
    paper_id: str
    title: str | None = None
    year: int | None = None
    authors: list[Author] = field(default_factory=list)
    venue: str | None = None
    venue_type: str | None = None
    fields_of_study: list[str] = field(default_factory=list)
    reference_count: int | None = None
    citation_count: int | None = None
    influential_citation_count: int | None = None
    tldr: str | None = None
    embedding: list[float] | None = None
    references: list[LinkedWork] = field(default_factory=list)
    citations: list[LinkedWork] = field(default_factory=list)
    references_truncated: bool = False
    citations_truncated: bool = False

    def __post_init__(self):
        if self.embedding is not None and len(self.embedding) != EMBEDDING_DIM:
            raise ValueError(
                f"{self.paper_id}: embedding has {len(self.embedding)} dimensions, expected {EMBEDDING_DIM}"
            )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> PaperRecord:
        d = dict(d)
        d["authors"] = [Author(*a) for a in d.get("authors", [])]
        for key in ("references", "citations"):
            d[key] = [_work_from_dict(w) for w in d.get(key, [])]
        return cls(**d)


def _work_from_dict(d: dict[str, Any]) -> LinkedWork:
    d = dict(d)
    d["authors"] = [Author(*a) for a in d.get("authors", [])]
    return LinkedWork(**d)


# Wire format (Graph-API style JSON) ---------------------------------------

def _authors(doc: dict) -> list[Author]:
    return [Author(a.get("name") or "", a.get("authorId") or None) for a in doc.get("authors") or []]


def _venue_type(doc: dict) -> str | None:
    pv = doc.get("publicationVenue")
    return pv.get("type") if isinstance(pv, dict) else None


def work_from_api(doc: dict) -> LinkedWork:
    return LinkedWork(
        work_id=doc.get("paperId") or "",
        title=doc.get("title") or "",
        authors=_authors(doc),
        year=doc.get("year"),
        venue=doc.get("venue") or None,
        venue_type=_venue_type(doc),
        fields_of_study=list(doc.get("fieldsOfStudy") or []),
    )


def paper_from_api(doc: dict) -> PaperRecord:
    """Build a record from a paper document; absent keys stay ``None``."""
    tldr = doc.get("tldr")
    emb = doc.get("embedding")
    return PaperRecord(
        paper_id=doc["paperId"],
        title=doc.get("title"),
        year=doc.get("year"),
        authors=_authors(doc),
        venue=doc.get("venue") or None,
        venue_type=_venue_type(doc),
        fields_of_study=list(doc.get("fieldsOfStudy") or []),
        reference_count=doc.get("referenceCount"),
        citation_count=doc.get("citationCount"),
        influential_citation_count=doc.get("influentialCitationCount"),
        tldr=tldr.get("text") if isinstance(tldr, dict) else tldr,
        embedding=list(emb["vector"]) if isinstance(emb, dict) and emb.get("vector") else None,
    )
