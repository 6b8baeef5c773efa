"""BibTeX ingestion: parse a proceedings bibliography into normalized corpus entries."""

from __future__ import annotations

import csv
import datetime
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

# Lowercase tokens that belong to the family name when they precede it.
NAME_PARTICLES = frozenset({"van", "von", "de", "du", "della", "di", "der", "den", "da", "del"})

# Letters without a Unicode decomposition to an ASCII base.
_TRANSLITERATE = str.maketrans({
    "ø": "o", "Ø": "O", "æ": "ae", "Æ": "AE", "œ": "oe", "Œ": "OE", "ß": "ss",
    "đ": "d", "Đ": "D", "ð": "d", "Ð": "D", "ł": "l", "Ł": "L", "þ": "th",
    "Þ": "Th", "ı": "i", "ħ": "h", "Ħ": "H",
})

_ACCENTS = {
    '"': "\u0308", "'": "\u0301", "`": "\u0300", "^": "\u0302", "~": "\u0303",
    "=": "\u0304", ".": "\u0307", "u": "\u0306", "v": "\u030c", "H": "\u030b",
    "c": "\u0327", "k": "\u0328", "r": "\u030a", "d": "\u0323", "b": "\u0331",
}

_SYMBOLS = {
    "o": "ø", "O": "Ø", "ae": "æ", "AE": "Æ", "oe": "œ", "OE": "Œ", "aa": "å",
    "AA": "Å", "ss": "ß", "l": "ł", "L": "Ł", "i": "ı", "j": "ȷ",
}

_FORMATTING = ("emph", "textit", "textbf", "textsc", "texttt", "textrm", "textsf",
               "textup", "mbox", "url", "mathrm", "mathit", "mathbf")

_ACCENT_RE = re.compile(
    r"""\\(["'`^~=.])\s*(?:\{\s*(\\[ij]|[A-Za-z])\s*\}|(\\[ij]|[A-Za-z]))"""
    r"""|\\([uvHckrdb])(?:\s*\{\s*(\\[ij]|[A-Za-z])\s*\}|\s+(\\[ij]|[A-Za-z]))"""
)
_SYMBOL_RE = re.compile(r"\\(ae|AE|oe|OE|aa|AA|ss|[oOlLij])(?![A-Za-z])\s*(?:\{\s*\})?")
_FORMAT_RE = re.compile(r"\\(?:%s)(?![A-Za-z])\s*" % "|".join(_FORMATTING))
_ESCAPED_RE = re.compile(r"\\([&%$#_])")
_BRACE_RE = re.compile(r"\\?[{}]")


class BibtexParseError(ValueError):
    """Unrecoverable syntax problem; ``offset`` is a byte offset into the UTF-8 input."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class AuthorName:
    full: str
    last: str
    ascii_last: str


@dataclass
class CorpusEntry:
    entry_key: str
    title: str
    raw_title: str
    authors: list[AuthorName]
    year: int | None
    venue_label: str = ""
    url_or_doi: str = ""
    excluded: bool = False
    entry_type: str = "inproceedings"
    malformed: bool = False
    problems: list[str] = field(default_factory=list)


def _accent(base: str, mark: str) -> str:
    if base in ("\\i", "\\j"):
        base = base[1]
    return unicodedata.normalize("NFC", base + mark)


def _decode_step(s: str) -> str:
    def accent(m: re.Match) -> str:
        if m.group(1):
            return _accent(m.group(2) or m.group(3), _ACCENTS[m.group(1)])
        return _accent(m.group(5) or m.group(6), _ACCENTS[m.group(4)])

    s = _ACCENT_RE.sub(accent, s)
    s = _SYMBOL_RE.sub(lambda m: _SYMBOLS[m.group(1)], s)
    s = _FORMAT_RE.sub("", s)
    s = _ESCAPED_RE.sub(r"\1", s)
    s = s.replace("\\\\", " ").replace("~", " ")
    s = _BRACE_RE.sub("", s)
    s = " ".join(s.split())
    return unicodedata.normalize("NFC", s)


def normalize_text(s: str) -> str:
    """Decode LaTeX accents and escapes, drop braces, collapse whitespace.

    Unknown control sequences are left in place. The result is a fixed point,
    so normalizing twice changes nothing.
    """
    for _ in range(16):
        nxt = _decode_step(s)
        if nxt == s:
            break
        s = nxt
    return s


def ascii_fold(s: str) -> str:
    """Transliterate to ASCII, dropping combining marks and unmappable characters."""
    s = unicodedata.normalize("NFKD", s.translate(_TRANSLITERATE))
    s = "".join(c for c in s if not unicodedata.combining(c))
    return s.encode("ascii", "ignore").decode("ascii")


def fold_name(s: str) -> str:
    folded = ascii_fold(s).lower()
    folded = re.sub(r"[^a-z'\- ]", "", folded)
    return " ".join(folded.split())


def extract_last_name(full: str) -> AuthorName:
    """Split an author string into its family name.

    Handles "Last, First" and "First [particles] Last"; a single token is its
    own family name.
    """
    full = normalize_text(full)
    if not full:
        raise ValueError("empty author name")
    if "," in full:
        last = full.split(",", 1)[0].strip() or full.replace(",", " ").strip()
    else:
        tokens = full.split()
        i = len(tokens) - 1
        while i > 0 and tokens[i - 1] in NAME_PARTICLES:
            i -= 1
        last = " ".join(tokens[i:])
    return AuthorName(full=full, last=last, ascii_last=fold_name(last))


def split_authors(value: str) -> list[str]:
    """Split a BibTeX author field on top-level ``and``."""
    parts, depth, start, i = [], 0, 0, 0
    while i < len(value):
        c = value[i]
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
        elif depth == 0 and value[i:i + 5].lower() == " and ":
            parts.append(value[start:i])
            start = i + 5
            i += 4
        i += 1
    parts.append(value[start:])
    return [p.strip() for p in parts if p.strip()]


def _parse_author(raw: str) -> AuthorName:
    raw = " ".join(raw.split())
    if raw.startswith("{") and raw.endswith("}") and _balanced(raw[1:-1]):
        name = normalize_text(raw)
        return AuthorName(full=name, last=name, ascii_last=fold_name(name))
    return extract_last_name(raw)


def _balanced(s: str) -> bool:
    depth = 0
    for c in s:
        depth += c == "{"
        depth -= c == "}"
        if depth < 0:
            return False
    return depth == 0


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def offset(self, pos: int | None = None) -> int:
        return len(self.text[: self.pos if pos is None else pos].encode("utf-8"))

    def error(self, message: str, pos: int | None = None) -> BibtexParseError:
        return BibtexParseError(message, self.offset(pos))

    def skip_ws(self) -> None:
        while self.pos < len(self.text):
            if self.text[self.pos].isspace():
                self.pos += 1
            elif self.text[self.pos] == "%":
                nl = self.text.find("\n", self.pos)
                self.pos = len(self.text) if nl < 0 else nl + 1
            else:
                break

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def ident(self) -> str:
        m = re.compile(r"[^\s,={}()#\"]+").match(self.text, self.pos)
        if not m:
            return ""
        self.pos = m.end()
        return m.group(0)

    def braced(self) -> str:
        start = self.pos
        depth = 0
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c == "\\":
                self.pos += 2
                continue
            if c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    self.pos += 1
                    return self.text[start + 1: self.pos - 1]
            self.pos += 1
        raise self.error("unbalanced braces", start)

    def quoted(self) -> str:
        start = self.pos
        self.pos += 1
        depth = 0
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c == "\\":
                self.pos += 2
                continue
            if c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth < 0:
                    raise self.error("unbalanced braces", self.pos)
            elif c == '"' and depth == 0:
                self.pos += 1
                return self.text[start + 1: self.pos - 1]
            self.pos += 1
        raise self.error("unterminated quoted value", start)

    def value(self) -> str:
        parts = []
        while True:
            self.skip_ws()
            c = self.peek()
            if c == "{":
                parts.append(self.braced())
            elif c == '"':
                parts.append(self.quoted())
            else:
                token = self.ident()
                if not token:
                    raise self.error("expected field value")
                parts.append(token)
            self.skip_ws()
            if self.peek() != "#":
                return "".join(parts)
            self.pos += 1


def _raw_entries(text: str):
    """Yield ``(entry_type, key, fields, byte_offset)`` for every @-entry."""
    sc = _Scanner(text)
    while True:
        at = text.find("@", sc.pos)
        if at < 0:
            return
        sc.pos = at + 1
        entry_type = sc.ident().lower()
        sc.skip_ws()
        opener = sc.peek()
        if opener not in "{(" or not opener:
            raise sc.error("expected '{' after entry type", at)
        closer = "}" if opener == "{" else ")"
        if entry_type in ("comment", "preamble", "string"):
            if opener == "{":
                sc.braced()
            else:
                end = text.find(")", sc.pos)
                if end < 0:
                    raise sc.error("unterminated entry", at)
                sc.pos = end + 1
            continue
        sc.pos += 1
        sc.skip_ws()
        key = sc.ident()
        sc.skip_ws()
        fields: dict[str, str] = {}
        if sc.peek() == ",":
            sc.pos += 1
            while True:
                sc.skip_ws()
                if sc.peek() == closer:
                    break
                name = sc.ident().lower()
                if not name:
                    raise sc.error(f"entry {key!r}: expected field name or closing delimiter", at)
                sc.skip_ws()
                if sc.peek() != "=":
                    raise sc.error(f"entry {key!r}: expected '=' after {name!r}")
                sc.pos += 1
                fields[name] = sc.value()
                sc.skip_ws()
                if sc.peek() == ",":
                    sc.pos += 1
                    continue
                if sc.peek() == closer:
                    break
                if not sc.peek():
                    raise sc.error("unbalanced braces", at)
                raise sc.error(f"entry {key!r}: unexpected character {sc.peek()!r}")
        elif sc.peek() != closer:
            raise sc.error("unbalanced braces" if not sc.peek() else f"entry {key!r}: malformed header", at)
        sc.pos += 1
        yield entry_type, key, fields, sc.offset(at)


def _build_entry(entry_type: str, key: str, fields: dict[str, str], offset: int) -> CorpusEntry:
    problems = []
    raw_title = fields.get("title", "")
    title = normalize_text(raw_title)
    if not key:
        problems.append("missing key")
    if not title:
        problems.append("missing title")
    authors = []
    for raw in split_authors(fields.get("author", "")):
        try:
            authors.append(_parse_author(raw))
        except ValueError:
            problems.append(f"unparseable author {raw!r}")
    if not authors:
        problems.append("missing authors")
    year = None
    raw_year = normalize_text(fields.get("year", ""))
    if re.fullmatch(r"\d{4}", raw_year):
        year = int(raw_year)
        if not 1900 <= year <= datetime.date.today().year:
            problems.append(f"year {year} out of range")
    else:
        problems.append(f"bad year {raw_year!r}" if raw_year else "missing year")
    if problems:
        log.warning("malformed entry %r at byte %d: %s", key, offset, "; ".join(problems))
    return CorpusEntry(
        entry_key=key,
        title=title,
        raw_title=raw_title,
        authors=authors,
        year=year,
        venue_label=normalize_text(fields.get("booktitle") or fields.get("journal") or ""),
        url_or_doi=normalize_text(fields.get("doi") or fields.get("url") or ""),
        entry_type=entry_type,
        malformed=bool(problems),
        problems=problems,
    )


def parse_bibliography(text: str) -> list[CorpusEntry]:
    """Parse BibTeX text into corpus entries in file order.

    Malformed entries are kept and flagged. Raises BibtexParseError on syntax
    errors and ValueError on duplicate keys.
    """
    entries = []
    seen: dict[str, int] = {}
    for entry_type, key, fields, offset in _raw_entries(text):
        if key in seen:
            raise ValueError(
                f"duplicate entry key {key!r} at byte offsets {seen[key]} and {offset}"
            )
        seen[key] = offset
        entries.append(_build_entry(entry_type, key, fields, offset))
    return entries


def read_bibliography(path: str | Path) -> list[CorpusEntry]:
    return parse_bibliography(Path(path).read_text(encoding="utf-8"))


def _bib_author(a: AuthorName) -> str:
    if a.last == a.full and " " in a.full:
        return "{" + a.full + "}"
    return a.full


def serialize_bibliography(entries: list[CorpusEntry]) -> str:
    chunks = []
    for e in entries:
        lines = [f"@{e.entry_type}{{{e.entry_key},"]
        lines.append(f"  title = {{{e.raw_title}}},")
        if e.authors:
            lines.append("  author = {%s}," % " and ".join(_bib_author(a) for a in e.authors))
        if e.year is not None:
            lines.append(f"  year = {{{e.year}}},")
        if e.venue_label:
            lines.append(f"  booktitle = {{{e.venue_label}}},")
        if e.url_or_doi:
            lines.append(f"  url = {{{e.url_or_doi}}},")
        lines.append("}")
        chunks.append("\n".join(lines))
    return "\n\n".join(chunks) + ("\n" if chunks else "")


CORPUS_ENTRY_COLUMNS = ["entry_key", "title", "authors", "year"]


def write_corpus_csv(entries: list[CorpusEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CORPUS_ENTRY_COLUMNS)
        for e in entries:
            w.writerow([e.entry_key, e.title, " and ".join(_bib_author(a) for a in e.authors),
                        "" if e.year is None else e.year])


def read_corpus_csv(path: str | Path) -> list[CorpusEntry]:
    """Reload entries written by :func:`write_corpus_csv`."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CORPUS_ENTRY_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        entries = []
        for row in reader:
            authors = [_parse_author(a) for a in split_authors(row["authors"])]
            entries.append(CorpusEntry(
                entry_key=row["entry_key"], title=row["title"], raw_title=row["title"],
                authors=authors, year=int(row["year"]) if row["year"] else None,
            ))
        return entries
