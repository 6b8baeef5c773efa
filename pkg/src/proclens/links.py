"""Consolidate link lists into unique-work, unique-author and corpus tables, persisted as CSV."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .corpus import CorpusEntry, fold_name
from .records import Author, PaperRecord
from .resolver import RESOLVED, ResolutionOutcome

DIRECTIONS = ("references", "citations")
SHADOW_PREFIX = "shadow:"


@dataclass
class WorkRow:
    work_id: str
    title: str
    year: int | None
    venue: str
    venue_type: str
    fields_of_study: list[str]
    total_count: int
    per_year: dict[int, int]
    in_corpus: bool = False
    authors: list[Author] = field(default_factory=list)


@dataclass
class AuthorRow:
    author_id: str
    name: str
    ref_count: int
    cit_count: int
    per_year: dict[int, int]
    has_published_in_corpus: bool
    shadow: bool = False


@dataclass
class CorpusRow:
    entry_key: str
    paper_id: str
    year: int | None
    reference_count: int
    citation_count: int
    influential_citation_count: int
    has_complete_references: bool
    fields_of_study: list[str]
    embedding_present: bool


@dataclass
class DataQuality:
    """Counters for link data the tables could not represent faithfully."""
    missing_work_ids: Counter = field(default_factory=Counter)
    shadow_author_links: Counter = field(default_factory=Counter)
    works_without_authors: Counter = field(default_factory=Counter)
    papers_without_year: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "missing_work_ids": dict(self.missing_work_ids),
            "shadow_author_links": dict(self.shadow_author_links),
            "works_without_authors": dict(self.works_without_authors),
            "papers_without_year": sorted(set(self.papers_without_year)),
        }


def _check_direction(direction: str) -> None:
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")


def _links(rec: PaperRecord, direction: str):
    return rec.references if direction == "references" else rec.citations


def _paper_year(rec: PaperRecord, years: dict[str, int] | None, quality: DataQuality | None) -> int | None:
    y = (years or {}).get(rec.paper_id, rec.year)
    if y is None and quality is not None:
        quality.papers_without_year.append(rec.paper_id)
    return y


def author_key(a: Author) -> tuple[str, bool]:
    """Backend id, or a deterministic name-derived shadow id when the backend has none."""
    if a.author_id:
        return a.author_id, False
    return SHADOW_PREFIX + fold_name(a.name).replace(" ", "-"), True


def consolidate_works(corpus: list[PaperRecord], direction: str, years: dict[str, int] | None = None,
                      quality: DataQuality | None = None) -> list[WorkRow]:
    """One row per unique linked work, tallied per corpus-paper proceedings year.

    Repeated links within one paper's list count once per occurrence. Links
    without a work id are skipped and counted in ``quality``.
    """
    _check_direction(direction)
    rows: dict[str, WorkRow] = {}
    for rec in corpus:
        y = _paper_year(rec, years, quality)
        if y is None:
            continue
        for w in _links(rec, direction):
            if not w.work_id:
                if quality is not None:
                    quality.missing_work_ids[direction] += 1
                continue
            row = rows.get(w.work_id)
            if row is None:
                row = rows[w.work_id] = WorkRow(
                    w.work_id, w.title, w.year, " ".join((w.venue or "").split()),
                    w.venue_type or "", list(w.fields_of_study), 0, {}, False, list(w.authors))
                if not w.authors and quality is not None:
                    quality.works_without_authors[direction] += 1
            row.total_count += 1
            row.per_year[y] = row.per_year.get(y, 0) + 1
    return list(rows.values())


def corpus_author_ids(corpus: Iterable[PaperRecord]) -> set[str]:
    return {author_key(a)[0] for rec in corpus for a in rec.authors}


def consolidate_authors(corpus: list[PaperRecord], direction: str, years: dict[str, int] | None = None,
                        quality: DataQuality | None = None) -> list[AuthorRow]:
    """One row per unique author of works linked in ``direction``.

    Every coauthor of a linked work gets one increment per link occurrence.
    Both ``ref_count`` and ``cit_count`` are filled; ``per_year`` follows
    ``direction``.
    """
    _check_direction(direction)
    published = corpus_author_ids(corpus)
    tallies: dict[str, dict[str, int]] = {}
    rows: dict[str, AuthorRow] = {}
    for d in DIRECTIONS:
        counts = tallies[d] = {}
        for rec in corpus:
            y = _paper_year(rec, years, None)
            if y is None:
                continue
            for w in _links(rec, d):
                if not w.work_id:
                    continue
                for a in w.authors:
                    aid, shadow = author_key(a)
                    counts[aid] = counts.get(aid, 0) + 1
                    if d != direction:
                        continue
                    row = rows.get(aid)
                    if row is None:
                        row = rows[aid] = AuthorRow(aid, a.name, 0, 0, {}, aid in published, shadow)
                    row.per_year[y] = row.per_year.get(y, 0) + 1
                    if shadow and quality is not None:
                        quality.shadow_author_links[direction] += 1
    for aid, row in rows.items():
        row.ref_count = tallies["references"].get(aid, 0)
        row.cit_count = tallies["citations"].get(aid, 0)
    return list(rows.values())


def mark_corpus_membership(works: list[WorkRow], corpus_ids: set[str]) -> list[WorkRow]:
    return [dataclasses.replace(w, in_corpus=w.work_id in corpus_ids) for w in works]


def build_corpus_table(entries: list[CorpusEntry], outcomes: list[ResolutionOutcome],
                       records: dict[str, PaperRecord]) -> list[CorpusRow]:
    """One row per corpus entry, resolved or not, in entry order."""
    status = {o.entry_key: o for o in outcomes}
    rows = []
    for e in entries:
        o = status.get(e.entry_key)
        rec = records.get(o.paper_id) if o is not None and o.status == RESOLVED else None
        if rec is None:
            rows.append(CorpusRow(e.entry_key, "", e.year, 0, 0, 0, False, [], False))
            continue
        rows.append(CorpusRow(
            e.entry_key, rec.paper_id, e.year if e.year is not None else rec.year,
            rec.reference_count or 0, rec.citation_count or 0, rec.influential_citation_count or 0,
            len(rec.references) > 0, list(rec.fields_of_study), rec.embedding is not None,
        ))
    return rows


# CSV persistence ---------------------------------------------------------------

def _fmt_per_year(d: dict[int, int]) -> str:
    return ";".join(f"{y}:{n}" for y, n in sorted(d.items()))


def _parse_per_year(s: str) -> dict[int, int]:
    out = {}
    for part in filter(None, s.split(";")):
        y, n = part.split(":")
        out[int(y)] = int(n)
    return out


def _fmt_bool(b: bool) -> str:
    return "true" if b else "false"


def _parse_bool(s: str) -> bool:
    if s not in ("true", "false"):
        raise ValueError(f"expected true/false, got {s!r}")
    return s == "true"


def _fmt_int(v: int | None) -> str:
    return "" if v is None else str(v)


def _parse_opt_int(s: str) -> int | None:
    return int(s) if s else None


def _fmt_tags(tags: list[str]) -> str:
    return ";".join(tags)


def _parse_tags(s: str) -> list[str]:
    return [t for t in s.split(";") if t]


def _fmt_authors(authors: list[Author]) -> str:
    return json.dumps([[a.name, a.author_id] for a in authors], ensure_ascii=False)


def _parse_authors(s: str) -> list[Author]:
    return [Author(n, i) for n, i in json.loads(s)] if s else []


_CODECS = {
    "int": (str, int),
    "opt_int": (_fmt_int, _parse_opt_int),
    "str": (str, str),
    "bool": (_fmt_bool, _parse_bool),
    "per_year": (_fmt_per_year, _parse_per_year),
    "tags": (_fmt_tags, _parse_tags),
    "authors": (_fmt_authors, _parse_authors),
}

SCHEMAS: dict[type, list[tuple[str, str]]] = {
    WorkRow: [("work_id", "str"), ("title", "str"), ("year", "opt_int"), ("venue", "str"),
              ("venue_type", "str"), ("fields_of_study", "tags"), ("total_count", "int"),
              ("per_year", "per_year"), ("in_corpus", "bool"), ("authors", "authors")],
    AuthorRow: [("author_id", "str"), ("name", "str"), ("ref_count", "int"), ("cit_count", "int"),
                ("per_year", "per_year"), ("has_published_in_corpus", "bool"), ("shadow", "bool")],
    CorpusRow: [("entry_key", "str"), ("paper_id", "str"), ("year", "opt_int"),
                ("reference_count", "int"), ("citation_count", "int"),
                ("influential_citation_count", "int"), ("has_complete_references", "bool"),
                ("fields_of_study", "tags"), ("embedding_present", "bool")],
}


def table_csv(rows: list, row_type: type) -> str:
    schema = SCHEMAS[row_type]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow([name for name, _ in schema])
    for r in rows:
        w.writerow([_CODECS[kind][0](getattr(r, name)) for name, kind in schema])
    return buf.getvalue()


def persist(rows: list, path: str | Path, row_type: type) -> None:
    """Write a table as RFC-4180 CSV with the schema's fixed column order."""
    Path(path).write_text(table_csv(rows, row_type), encoding="utf-8", newline="")


def load(path: str | Path, row_type: type) -> list:
    schema = SCHEMAS[row_type]
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [name for name, _ in schema if name not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        return [row_type(**{name: _CODECS[kind][1](rec[name]) for name, kind in schema})
                for rec in reader]
