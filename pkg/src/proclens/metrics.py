"""Corpus statistics, distributions and rankings computed from the link-store tables."""

from __future__ import annotations

import hashlib
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any

from .corpus import fold_name
from .links import AuthorRow, CorpusRow, WorkRow, table_csv

THESIS_MARKERS = ("phd", "thesis", "dissertation")
POPULATIONS = ("refs", "cits", "corpus", "internal_refs", "internal_cits")


@dataclass
class Tables:
    works_ref: list[WorkRow] = field(default_factory=list)
    works_cit: list[WorkRow] = field(default_factory=list)
    authors_ref: list[AuthorRow] = field(default_factory=list)
    authors_cit: list[AuthorRow] = field(default_factory=list)
    corpus: list[CorpusRow] = field(default_factory=list)

    def works(self, direction: str) -> list[WorkRow]:
        return self.works_ref if _ref(direction) else self.works_cit

    def authors(self, direction: str) -> list[AuthorRow]:
        return self.authors_ref if _ref(direction) else self.authors_cit


def _ref(direction: str) -> bool:
    if direction in ("references", "refs", "ref"):
        return True
    if direction in ("citations", "cits", "cit"):
        return False
    raise ValueError(f"unknown direction {direction!r}")


def snapshot_hash(rows: list, row_type: type) -> str:
    return hashlib.sha256(table_csv(rows, row_type).encode("utf-8")).hexdigest()[:16]


def _pct(num: float, den: float) -> float | None:
    return 100.0 * num / den if den else None


def is_thesis(row: WorkRow) -> bool:
    text = f"{row.venue} {row.venue_type}".lower()
    return any(m in text for m in THESIS_MARKERS)


# Corpus-level ----------------------------------------------------------------

def corpus_summary(corpus: list[CorpusRow]) -> dict[str, Any]:
    """Totals and averages. Reference averages use only papers with a non-empty reference list."""
    if not corpus:
        raise ValueError("empty corpus")
    n = len(corpus)
    indexed = [r for r in corpus if r.paper_id]
    complete = [r for r in indexed if r.has_complete_references]
    total_refs = sum(r.reference_count for r in complete)
    total_cits = sum(r.citation_count for r in corpus)
    return {
        "papers": n,
        "indexed": len(indexed),
        "complete_references": len(complete),
        "indexed_pct": _pct(len(indexed), n),
        "complete_pct": _pct(len(complete), n),
        "total_references": total_refs,
        "total_citations": total_cits,
        "total_influential_citations": sum(r.influential_citation_count for r in corpus),
        "avg_references_per_paper": total_refs / len(complete) if complete else None,
        "avg_citations_per_paper": total_cits / n,
        "with_embedding": sum(r.embedding_present for r in corpus),
    }


def papers_per_year(corpus: list[CorpusRow]) -> list[dict[str, Any]]:
    by_year: dict[int, list[int]] = defaultdict(lambda: [0, 0, 0])
    for r in corpus:
        if r.year is None:
            continue
        c = by_year[r.year]
        c[0] += 1
        c[1] += bool(r.paper_id)
        c[2] += r.has_complete_references
    return [{"year": y, "papers": c[0], "indexed": c[1], "complete": c[2]}
            for y, c in sorted(by_year.items())]


def yearly_reference_stats(works_ref: list[WorkRow], corpus: list[CorpusRow]) -> list[dict[str, Any]]:
    """Per proceedings year: total references, works never referenced in an earlier year, average per paper.

    The average is ``None`` for years without a paper that has complete references.
    """
    totals: Counter = Counter()
    new: Counter = Counter()
    for w in works_ref:
        for y, n in w.per_year.items():
            totals[y] += n
        if w.per_year:
            new[min(w.per_year)] += 1
    complete: Counter = Counter(r.year for r in corpus if r.has_complete_references and r.year is not None)
    years = sorted(set(totals) | {r.year for r in corpus if r.year is not None})
    return [{
        "year": y,
        "total": totals[y],
        "new_unique": new[y],
        "complete_papers": complete[y],
        "avg_per_paper": totals[y] / complete[y] if complete[y] else None,
    } for y in years]


def self_link_rates(works: list[WorkRow], authors: list[AuthorRow], direction: str) -> dict[str, Any]:
    """Share of link occurrences that point into the corpus, at work and at author level.

    Author level weights each coauthor occurrence; the unique-author variant
    counts each author once.
    """
    _ref(direction)
    links, internal = Counter(), Counter()
    for w in works:
        for y, n in w.per_year.items():
            links[y] += n
            if w.in_corpus:
                internal[y] += n
    a_links, a_internal, a_unique, a_unique_in = Counter(), Counter(), Counter(), Counter()
    for a in authors:
        for y, n in a.per_year.items():
            a_links[y] += n
            a_unique[y] += 1
            if a.has_published_in_corpus:
                a_internal[y] += n
                a_unique_in[y] += 1
    per_year = [{
        "year": y,
        "links": links[y],
        "internal_links": internal[y],
        "work_level_pct": _pct(internal[y], links[y]),
        "author_links": a_links[y],
        "author_level_pct": _pct(a_internal[y], a_links[y]),
        "unique_author_pct": _pct(a_unique_in[y], a_unique[y]),
    } for y in sorted(set(links) | set(a_links))]
    overall = {
        "links": sum(links.values()),
        "internal_links": sum(internal.values()),
        "work_level_pct": _pct(sum(internal.values()), sum(links.values())),
        "author_links": sum(a_links.values()),
        "author_level_pct": _pct(sum(a_internal.values()), sum(a_links.values())),
        "unique_authors": len(authors),
        "unique_author_pct": _pct(sum(a.has_published_in_corpus for a in authors), len(authors)),
    }
    return {"direction": direction, "per_year": per_year, "overall": overall}


def citation_histogram(corpus: list[CorpusRow]) -> dict[str, Any]:
    counts = [r.citation_count for r in corpus]
    n = len(counts)
    hist = sorted(Counter(counts).items())
    mean = sum(counts) / n if n else None
    std = math.sqrt(sum((c - mean) ** 2 for c in counts) / n) if n else None
    uncited = sum(1 for c in counts if c == 0)
    return {
        "papers": n,
        "histogram": [[c, k] for c, k in hist],
        "mean": mean,
        "std": std,
        "uncited": uncited,
        "uncited_pct": _pct(uncited, n),
    }


def citation_concentration(corpus: list[CorpusRow], mass: float = 0.5) -> float | None:
    """Smallest fraction of papers whose citations reach ``mass`` of all citations."""
    if not 0 < mass <= 1:
        raise ValueError("mass must be in (0, 1]")
    order = sorted(range(len(corpus)), key=lambda i: (-corpus[i].citation_count, i))
    total = sum(r.citation_count for r in corpus)
    if total == 0:
        return None
    target = mass * total
    acc = 0
    for k, i in enumerate(order, start=1):
        acc += corpus[i].citation_count
        if acc >= target:
            return k / len(corpus)
    return 1.0


def relative_age_distribution(works: list[WorkRow], direction: str) -> dict[str, Any]:
    """Signed year gap between the citing and the cited side of every link occurrence.

    Negative ages stay in the histogram and are also counted as anomalies.
    Links whose work has no year are excluded and counted.
    """
    is_ref = _ref(direction)
    hist: Counter = Counter()
    missing = 0
    for w in works:
        for y, n in w.per_year.items():
            if w.year is None:
                missing += n
                continue
            hist[(y - w.year) if is_ref else (w.year - y)] += n
    total = sum(hist.values())
    return {
        "direction": direction,
        "histogram": [[age, n] for age, n in sorted(hist.items())],
        "links": total,
        "mean": sum(a * n for a, n in hist.items()) / total if total else None,
        "anomalies": sum(n for a, n in hist.items() if a < 0),
        "missing_year_links": missing,
    }


# Field-of-study tags ----------------------------------------------------------------

def _population_items(tables: Tables, population: str) -> list[tuple[list[str], dict[int, int]]]:
    """``(tags, weight per year)`` per item; link populations are occurrence weighted."""
    if population == "corpus":
        return [(r.fields_of_study, {r.year: 1} if r.year is not None else {})
                for r in tables.corpus if r.paper_id]
    if population in ("refs", "internal_refs"):
        works = tables.works_ref
    elif population in ("cits", "internal_cits"):
        works = tables.works_cit
    else:
        raise ValueError(f"unknown population {population!r}; expected one of {POPULATIONS}")
    internal = population.startswith("internal")
    return [(w.fields_of_study, w.per_year) for w in works if w.in_corpus or not internal]


def field_tag_distribution(tables: Tables, population: str) -> dict[str, Any]:
    """Percentage of population items carrying each tag; items may carry several."""
    items = _population_items(tables, population)
    n = 0
    carrying: Counter = Counter()
    for tags, weights in items:
        wsum = sum(weights.values()) if population != "corpus" else 1
        n += wsum
        for t in set(tags):
            carrying[t] += wsum
    per_tag = {t: 100.0 * c / n for t, c in sorted(carrying.items(), key=lambda kv: (-kv[1], kv[0]))} if n else {}
    return {"population": population, "items": n, "per_tag": per_tag,
            "cumulative_pct": sum(per_tag.values())}


def diversity(shares: list[float]) -> float | None:
    """1 for uniform shares, 0 when all mass sits on one tag (normalized coefficient of variation)."""
    t = len(shares)
    total = sum(shares)
    if t < 2 or total <= 0:
        return None
    mean = total / t
    std = math.sqrt(sum((s - mean) ** 2 for s in shares) / t)
    return 1.0 - (std / mean) / math.sqrt(t - 1)


def tag_diversity_by_year(tables: Tables, population: str) -> dict[str, Any]:
    items = _population_items(tables, population)
    tags = sorted({t for tg, _ in items for t in tg})
    occ: dict[int, Counter] = defaultdict(Counter)
    for tg, weights in items:
        for y, n in weights.items():
            year_occ = occ[y]
            for t in set(tg):
                year_occ[t] += n
    per_year = []
    for y in sorted(occ):
        total = sum(occ[y].values())
        shares = [occ[y][t] / total for t in tags] if total else []
        mean = 1 / len(tags) if tags and total else None
        std = math.sqrt(sum((s - mean) ** 2 for s in shares) / len(shares)) if shares else None
        per_year.append({"year": y, "occurrences": total, "diversity": diversity(shares) if shares else None,
                         "share_std": std})
    return {"population": population, "tags": tags, "per_year": per_year}


# Rankings ---------------------------------------------------------------------

def venue_ranking(works: list[WorkRow], direction: str, top_n: int = 40) -> dict[str, Any]:
    """Rank venues by link occurrences; ties break lexicographically."""
    _ref(direction)
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    totals: Counter = Counter()
    occurrences = 0
    for w in works:
        occurrences += w.total_count
        v = " ".join(w.venue.split())
        if v:
            totals[v] += w.total_count
    ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    valid = sum(totals.values())
    top = ranked[:top_n]
    return {
        "direction": direction,
        "ranking": [{"rank": i, "venue": v, "count": c} for i, (v, c) in enumerate(top, start=1)],
        "venues": len(totals),
        "occurrences": occurrences,
        "valid_occurrences": valid,
        "valid_venue_coverage_pct": _pct(valid, occurrences) or 0.0,
        "top_share_pct": _pct(sum(c for _, c in top), valid) or 0.0,
    }


def venue_alias_suggestions(works: list[WorkRow]) -> list[dict[str, Any]]:
    """Venue spellings that collapse to the same letters-only key; never merged automatically."""
    groups: dict[str, Counter] = defaultdict(Counter)
    for w in works:
        v = " ".join(w.venue.split())
        if v:
            groups[re.sub(r"[^a-z0-9]", "", fold_name(v))][v] += w.total_count
    return [{"key": k, "spellings": dict(sorted(c.items()))}
            for k, c in sorted(groups.items()) if len(c) > 1]


def author_ranking(authors: list[AuthorRow], direction: str, top_n: int = 40) -> list[dict[str, Any]]:
    is_ref = _ref(direction)
    rows = sorted(authors, key=lambda a: (-(a.ref_count if is_ref else a.cit_count), a.author_id))
    return [{"rank": i, "author_id": a.author_id, "name": a.name,
             "count": a.ref_count if is_ref else a.cit_count,
             "has_published_in_corpus": a.has_published_in_corpus}
            for i, a in enumerate(rows[:top_n], start=1)]


def work_ranking(works: list[WorkRow], direction: str, top_n: int = 40,
                 exclude_corpus: bool = False, exclude_theses: bool = False) -> list[dict[str, Any]]:
    _ref(direction)
    keep = [w for w in works
            if not (exclude_corpus and w.in_corpus) and not (exclude_theses and is_thesis(w))]
    keep.sort(key=lambda w: (-w.total_count, w.work_id))
    return [{"rank": i, "work_id": w.work_id, "title": w.title, "year": w.year, "venue": w.venue,
             "count": w.total_count, "in_corpus": w.in_corpus}
            for i, w in enumerate(keep[:top_n], start=1)]


def bidirectional_works(works_ref: list[WorkRow], works_cit: list[WorkRow], exclude_corpus: bool = False,
                        exclude_theses: bool = True, top_n: int | None = None) -> dict[str, Any]:
    """Works both referenced by and citing the corpus, ranked by refs + cits.

    Ties go to the older work, then to the smaller work id.
    """
    cits = {w.work_id: w for w in works_cit}
    both = [(w, cits[w.work_id]) for w in works_ref if w.work_id in cits]
    rows = []
    for r, c in both:
        if exclude_corpus and r.in_corpus:
            continue
        if exclude_theses and (is_thesis(r) or is_thesis(c)):
            continue
        rows.append({"work_id": r.work_id, "title": r.title, "venue": r.venue, "year": r.year,
                     "refs": r.total_count, "cits": c.total_count,
                     "total": r.total_count + c.total_count, "in_corpus": r.in_corpus})
    rows.sort(key=lambda d: (-d["total"], d["year"] is None, d["year"] or 0, d["work_id"]))
    if top_n is not None:
        rows = rows[:top_n]
    for i, d in enumerate(rows, start=1):
        d["rank"] = i
    return {"intersection": len(both), "not_in_corpus": sum(1 for r, _ in both if not r.in_corpus),
            "rows": rows}


def mismatch_pct(a: int, b: int) -> float:
    return 100.0 * abs(a - b) / max(a, b) if max(a, b) else 0.0


def consistency_check(works_ref: list[WorkRow], works_cit: list[WorkRow]) -> dict[str, Any]:
    """Corpus-internal reference occurrences versus corpus-internal citation occurrences."""
    a = sum(w.total_count for w in works_ref if w.in_corpus)
    b = sum(w.total_count for w in works_cit if w.in_corpus)
    return {"internal_ref_count": a, "internal_cit_count": b, "mismatch_pct": mismatch_pct(a, b)}


# Data quality ------------------------------------------------------------------

def anachronistic_internal_references(works_ref: list[WorkRow]) -> list[dict[str, Any]]:
    """Internal references to corpus papers published after the referencing proceedings."""
    out = []
    for w in works_ref:
        if not w.in_corpus or w.year is None:
            continue
        for y, n in sorted(w.per_year.items()):
            if w.year > y:
                out.append({"work_id": w.work_id, "work_year": w.year, "referencing_year": y, "count": n})
    return out


def merge_authors_by_name(authors: list[AuthorRow]) -> list[dict[str, Any]]:
    """Sensitivity report: author ids sharing a folded name. Tables are never rewritten."""
    groups: dict[str, list[AuthorRow]] = defaultdict(list)
    for a in authors:
        groups[fold_name(a.name)].append(a)
    return [{"name": k, "author_ids": sorted(a.author_id for a in g),
             "ref_count": sum(a.ref_count for a in g), "cit_count": sum(a.cit_count for a in g)}
            for k, g in sorted(groups.items()) if len(g) > 1]


# Report ------------------------------------------------------------------------

def _sub(filter_: str, sources: list[tuple[list, type]], data: Any) -> dict[str, Any]:
    return {"filter": filter_,
            "source": "+".join(snapshot_hash(rows, t) for rows, t in sources),
            "data": data}


def build_report(tables: Tables, top_n: int = 40, mass: float = 0.5, merge_by_name: bool = False,
                 quality: dict | None = None) -> dict[str, Any]:
    """Every sub-report, each tagged with its filter and the hashes of the tables it read."""
    t = tables
    C = (t.corpus, CorpusRow)
    WR, WC = (t.works_ref, WorkRow), (t.works_cit, WorkRow)
    AR, AC = (t.authors_ref, AuthorRow), (t.authors_cit, AuthorRow)
    report: dict[str, Any] = {
        "corpus_summary": _sub("all corpus entries", [C], corpus_summary(t.corpus)),
        "papers_per_year": _sub("all corpus entries", [C], papers_per_year(t.corpus)),
        "yearly_ref_stats": _sub("direction=references", [WR, C], yearly_reference_stats(t.works_ref, t.corpus)),
        "self_link_rates": {
            "references": _sub("direction=references", [WR, AR], self_link_rates(t.works_ref, t.authors_ref, "references")),
            "citations": _sub("direction=citations", [WC, AC], self_link_rates(t.works_cit, t.authors_cit, "citations")),
        },
        "citation_histogram": _sub("all corpus entries", [C], citation_histogram(t.corpus)),
        "concentration": _sub(f"all corpus entries; mass={mass}", [C],
                              {"mass": mass, "paper_fraction": citation_concentration(t.corpus, mass)}),
        "relative_age": {
            "references": _sub("direction=references", [WR], relative_age_distribution(t.works_ref, "references")),
            "citations": _sub("direction=citations", [WC], relative_age_distribution(t.works_cit, "citations")),
        },
        "field_tags": {p: _sub(f"population={p}", [C] if p == "corpus" else [WR if "ref" in p else WC],
                               field_tag_distribution(t, p)) for p in POPULATIONS},
        "tag_diversity": {p: _sub(f"population={p}", [C] if p == "corpus" else [WR if "ref" in p else WC],
                                  tag_diversity_by_year(t, p)) for p in ("refs", "cits", "corpus")},
        "venue_rankings": {
            "references": _sub(f"direction=references; top_n={top_n}", [WR], venue_ranking(t.works_ref, "references", top_n)),
            "citations": _sub(f"direction=citations; top_n={top_n}", [WC], venue_ranking(t.works_cit, "citations", top_n)),
        },
        "venue_aliases": _sub("all works", [WR, WC], venue_alias_suggestions(t.works_ref + t.works_cit)),
        "author_rankings": {
            "references": _sub(f"direction=references; top_n={top_n}", [AR], author_ranking(t.authors_ref, "references", top_n)),
            "citations": _sub(f"direction=citations; top_n={top_n}", [AC], author_ranking(t.authors_cit, "citations", top_n)),
        },
        "work_rankings": {
            "references": _sub(f"direction=references; top_n={top_n}", [WR], work_ranking(t.works_ref, "references", top_n)),
            "references_external": _sub(f"direction=references; exclude_corpus; exclude_theses; top_n={top_n}", [WR],
                                        work_ranking(t.works_ref, "references", top_n, True, True)),
            "citations": _sub(f"direction=citations; top_n={top_n}", [WC], work_ranking(t.works_cit, "citations", top_n)),
        },
        "bidirectional_works": _sub(f"exclude_corpus; exclude_theses; top_n={top_n}", [WR, WC],
                                    bidirectional_works(t.works_ref, t.works_cit, True, True, top_n)),
        "consistency": _sub("in_corpus works", [WR, WC], consistency_check(t.works_ref, t.works_cit)),
        "data_quality": _sub("in_corpus references", [WR], {
            "anachronistic_internal_references": anachronistic_internal_references(t.works_ref),
            "link_quality": quality or {},
        }),
    }
    if merge_by_name:
        report["author_name_merge"] = _sub("all authors", [AR, AC],
                                           merge_authors_by_name(t.authors_ref + t.authors_cit))
    return report
