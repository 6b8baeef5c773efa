"""Ad-hoc filtering of the link tables with ``key=value`` terms."""

from __future__ import annotations

import csv
import io
import shlex
from dataclasses import dataclass

from .atlas import parse_year_range
from .corpus import ascii_fold
from .links import AuthorRow, WorkRow
from .metrics import Tables

QUERY_KEYS = ("author", "direction", "field", "in_corpus", "sort", "table", "top", "venue", "year")
WORK_SORTS = ("count", "year", "title", "venue")
AUTHOR_SORTS = ("count", "name")
WORK_COLUMNS = ["work_id", "title", "year", "venue", "count", "in_corpus", "fields_of_study"]
AUTHOR_COLUMNS = ["author_id", "name", "count", "has_published_in_corpus"]


class QueryError(ValueError):
    pass


@dataclass
class Query:
    direction: str = "references"
    table: str = "works"
    author: str | None = None
    venue: str | None = None
    field: str | None = None
    year: tuple[int | None, int | None] | None = None
    in_corpus: bool | None = None
    sort: str = "count"
    top: int | None = None


def tokenize(args: list[str]) -> list[str]:
    """Split terms; a word without ``=`` continues the previous term's value."""
    terms: list[str] = []
    for arg in args:
        try:
            parts = shlex.split(arg)
        except ValueError:
            # unbalanced quote, e.g. an apostrophe in a name
            parts = arg.split()
        for p in parts:
            if "=" in p:
                terms.append(p)
            elif terms:
                terms[-1] += " " + p
            else:
                raise QueryError(f"expected key=value, got {p!r}; valid keys: {', '.join(QUERY_KEYS)}")
    return terms


def parse_query(args: list[str]) -> Query:
    q = Query()
    for term in tokenize(args):
        key, value = term.split("=", 1)
        key, value = key.strip().lower(), value.strip()
        if key not in QUERY_KEYS:
            raise QueryError(f"unknown key {key!r}; valid keys: {', '.join(QUERY_KEYS)}")
        if key == "direction":
            if value in ("ref", "refs", "references"):
                q.direction = "references"
            elif value in ("cit", "cits", "citations"):
                q.direction = "citations"
            else:
                raise QueryError("direction must be ref or cit")
        elif key == "table":
            if value not in ("works", "authors"):
                raise QueryError("table must be works or authors")
            q.table = value
        elif key == "year":
            try:
                q.year = parse_year_range(value)
            except ValueError as exc:
                raise QueryError(f"bad year range {value!r}; use A..B, A.., ..B or A") from exc
        elif key == "top":
            if not value.isdigit() or int(value) < 1:
                raise QueryError("top must be a positive integer")
            q.top = int(value)
        elif key == "in_corpus":
            if value.lower() not in ("true", "false"):
                raise QueryError("in_corpus must be true or false")
            q.in_corpus = value.lower() == "true"
        else:
            setattr(q, key, value)
    valid_sorts = WORK_SORTS if q.table == "works" else AUTHOR_SORTS
    if q.sort.lstrip("-") not in valid_sorts:
        raise QueryError(f"sort must be one of {', '.join(valid_sorts)} (prefix - to reverse)")
    if q.table == "authors" and (q.venue or q.field):
        raise QueryError("venue and field filters apply to table=works only")
    return q


def _norm(s: str) -> str:
    return " ".join(ascii_fold(s).lower().split())


def _in_window(per_year: dict[int, int], window) -> int:
    lo, hi = window
    return sum(n for y, n in per_year.items() if (lo is None or y >= lo) and (hi is None or y <= hi))


def _work_rows(q: Query, works: list[WorkRow]) -> list[dict]:
    out = []
    for w in works:
        if q.author and not any(_norm(q.author) in _norm(a.name) for a in w.authors):
            continue
        if q.venue and _norm(w.venue) != _norm(q.venue):
            continue
        if q.field and _norm(q.field) not in {_norm(t) for t in w.fields_of_study}:
            continue
        if q.in_corpus is not None and w.in_corpus != q.in_corpus:
            continue
        count = w.total_count if q.year is None else _in_window(w.per_year, q.year)
        if count == 0:
            continue
        out.append({"work_id": w.work_id, "title": w.title, "year": w.year, "venue": w.venue, "count": count,
                    "in_corpus": w.in_corpus, "fields_of_study": ";".join(w.fields_of_study)})
    return out


def _author_rows(q: Query, authors: list[AuthorRow]) -> list[dict]:
    out = []
    for a in authors:
        if q.author and _norm(q.author) not in _norm(a.name):
            continue
        if q.in_corpus is not None and a.has_published_in_corpus != q.in_corpus:
            continue
        count = sum(a.per_year.values()) if q.year is None else _in_window(a.per_year, q.year)
        if count == 0:
            continue
        out.append({"author_id": a.author_id, "name": a.name, "count": count,
                    "has_published_in_corpus": a.has_published_in_corpus})
    return out


def run_query(q: Query, tables: Tables) -> tuple[list[str], list[dict]]:
    if q.table == "works":
        rows, cols, tie = _work_rows(q, tables.works(q.direction)), WORK_COLUMNS, "work_id"
    else:
        rows, cols, tie = _author_rows(q, tables.authors(q.direction)), AUTHOR_COLUMNS, "author_id"
    key = q.sort.lstrip("-")
    # default direction: counts and years descending, text ascending; "-" flips it
    descending = key in ("count", "year")
    if q.sort.startswith("-"):
        descending = not descending
    rows.sort(key=lambda r: r[tie])
    missing = [r for r in rows if r[key] is None]
    rows = [r for r in rows if r[key] is not None]
    rows.sort(key=lambda r: r[key] if key in ("count", "year") else _norm(str(r[key])), reverse=descending)
    rows += missing
    if q.top is not None:
        rows = rows[:q.top]
    return cols, rows


def query_csv(cols: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow(["true" if r[c] is True else "false" if r[c] is False else "" if r[c] is None else r[c]
                    for c in cols])
    return buf.getvalue()
