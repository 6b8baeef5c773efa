"""Map corpus entries to backend paper ids with a progressive query ladder."""

from __future__ import annotations

import csv
import logging
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import CorpusEntry, ascii_fold, extract_last_name, fold_name
from .metadata.errors import TransportError
from .records import PaperRecord

log = logging.getLogger(__name__)

MAX_RUNGS = 12
RESOLVED, NEEDS_MANUAL, EXCLUDED, FAILED = "Resolved", "NeedsManual", "Excluded", "Failed"
RESOLUTION_COLUMNS = ["entry_key", "status", "paper_id", "rung_used", "note"]


@dataclass
class QueryLadder:
    rungs: list[str]
    # 1-based position in the full twelve-rung ladder for each surviving rung
    positions: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rungs)


@dataclass
class ResolutionOutcome:
    entry_key: str
    status: str
    paper_id: str = ""
    rung_used: int | None = None
    note: str = ""


@dataclass
class OverrideTable:
    manual_ids: dict[str, str] = field(default_factory=dict)
    exclusions: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        both = set(self.manual_ids) & set(self.exclusions)
        if both:
            raise ValueError(f"entries both overridden and excluded: {sorted(both)}")


@dataclass
class CoverageSummary:
    total: int
    counts: dict[str, int]
    coverage: float
    note: str = ""
    collisions: dict[str, list[str]] = field(default_factory=dict)


def fold_title(title: str) -> str:
    """ASCII-fold, drop punctuation, lowercase."""
    s = ascii_fold(title).lower()
    s = re.sub(r"[^a-z0-9\s]", " ", s)
    return " ".join(s.split())


def build_query_ladder(entry: CorpusEntry, venue_token: str) -> QueryLadder:
    """Query strings from most to least specific; rungs missing an ingredient are skipped."""
    title = " ".join(entry.title.split())
    if not title:
        raise ValueError(f"{entry.entry_key}: empty title")
    lasts = " ".join(a.last for a in entry.authors) or None
    first = entry.authors[0].last if entry.authors else None
    first_folded = fold_name(entry.authors[0].last) if entry.authors else None
    year = str(entry.year) if entry.year is not None else None
    token = venue_token.strip() or None
    folded = fold_title(title) or None
    candidates = [
        (title, lasts, year, token),
        (title, lasts, year),
        (title, lasts),
        (title, first, year),
        (title, first),
        (title, year, token),
        (title, year),
        (title, token),
        (title,),
        (folded, first_folded),
        (folded, year),
        (folded,),
    ]
    rungs, positions = [], []
    for pos, parts in enumerate(candidates, start=1):
        if any(p is None for p in parts):
            continue
        q = " ".join(parts)
        if q not in rungs:
            rungs.append(q)
            positions.append(pos)
    return QueryLadder(rungs, positions)


def validate_candidate(entry: CorpusEntry, candidate: PaperRecord) -> bool:
    """Same number of authors and the same multiset of folded family names."""
    if len(candidate.authors) != len(entry.authors):
        return False
    theirs = Counter()
    for a in candidate.authors:
        theirs[_candidate_last(a.name)] += 1
    return theirs == Counter(a.ascii_last for a in entry.authors)


def _candidate_last(name: str) -> str:
    try:
        return extract_last_name(name).ascii_last
    except ValueError:
        return ""


def resolve(entry: CorpusEntry, client, overrides: OverrideTable, venue_token: str = "") -> ResolutionOutcome:
    """Resolve one entry. Only the first search hit of each rung is considered.

    Transport failures propagate as TransportError.
    """
    key = entry.entry_key
    if key in overrides.exclusions or entry.excluded:
        return ResolutionOutcome(key, EXCLUDED, note=overrides.exclusions.get(key, "excluded"))
    if key in overrides.manual_ids:
        return ResolutionOutcome(key, RESOLVED, overrides.manual_ids[key], note="manual override")
    if not entry.title:
        return ResolutionOutcome(key, NEEDS_MANUAL, note="no title")
    ladder = build_query_ladder(entry, venue_token)
    rejected = 0
    for q, pos in zip(ladder.rungs, ladder.positions):
        hits = client.search(q)
        if not hits:
            continue
        if validate_candidate(entry, hits[0]):
            return ResolutionOutcome(key, RESOLVED, hits[0].paper_id, pos)
        rejected += 1
    return ResolutionOutcome(key, NEEDS_MANUAL,
                             note=f"{len(ladder)} rungs tried, {rejected} candidates rejected")


def resolve_corpus(entries: list[CorpusEntry], client, overrides: OverrideTable,
                   venue_token: str = "", workers: int = 1) -> tuple[list[ResolutionOutcome], CoverageSummary]:
    """Resolve every entry in input order; transport failures become ``Failed`` outcomes."""

    def one(entry: CorpusEntry) -> ResolutionOutcome:
        try:
            return resolve(entry, client, overrides, venue_token)
        except TransportError as exc:
            log.error("%s: %s", entry.entry_key, exc)
            return ResolutionOutcome(entry.entry_key, FAILED, note=str(exc))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, entries))
    else:
        outcomes = [one(e) for e in entries]

    by_id: dict[str, list[str]] = {}
    for o in outcomes:
        if o.status == RESOLVED:
            by_id.setdefault(o.paper_id, []).append(o.entry_key)
    collisions = {pid: keys for pid, keys in by_id.items() if len(keys) > 1}
    for o in outcomes:
        if o.paper_id in collisions:
            others = [k for k in collisions[o.paper_id] if k != o.entry_key]
            o.note = (o.note + "; " if o.note else "") + f"collision with {', '.join(others)}"
    return outcomes, summarize(outcomes, collisions)


def summarize(outcomes: list[ResolutionOutcome], collisions: dict[str, list[str]] | None = None) -> CoverageSummary:
    counts = {s: 0 for s in (RESOLVED, NEEDS_MANUAL, EXCLUDED, FAILED)}
    for o in outcomes:
        counts[o.status] += 1
    eligible = len(outcomes) - counts[EXCLUDED]
    if eligible == 0:
        return CoverageSummary(len(outcomes), counts, 0.0, "no eligible entries; coverage undefined",
                               collisions or {})
    return CoverageSummary(len(outcomes), counts, counts[RESOLVED] / eligible, "", collisions or {})


# Flat-file tables ------------------------------------------------------------

def _read_rows(path: str | Path, columns: list[str]) -> list[dict[str, str]]:
    path = Path(path)
    if not path.exists():
        return []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in columns if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        return list(reader)


def load_overrides(overrides_path: str | Path | None, exclusions_path: str | Path | None) -> OverrideTable:
    manual = {r["entry_key"]: r["paper_id"].strip()
              for r in (_read_rows(overrides_path, ["entry_key", "paper_id"]) if overrides_path else [])
              if r["paper_id"].strip()}
    excl = {r["entry_key"]: r["reason"]
            for r in (_read_rows(exclusions_path, ["entry_key", "reason"]) if exclusions_path else [])}
    return OverrideTable(manual, excl)


def write_overrides(table: OverrideTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["entry_key", "paper_id"])
        for k, v in table.manual_ids.items():
            w.writerow([k, v])


def write_resolution(outcomes: list[ResolutionOutcome], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESOLUTION_COLUMNS)
        for o in outcomes:
            w.writerow([o.entry_key, o.status, o.paper_id,
                        "" if o.rung_used is None else o.rung_used, o.note])


def read_resolution(path: str | Path) -> list[ResolutionOutcome]:
    return [ResolutionOutcome(r["entry_key"], r["status"], r["paper_id"],
                              int(r["rung_used"]) if r["rung_used"] else None, r["note"])
            for r in _read_rows(path, RESOLUTION_COLUMNS)]
