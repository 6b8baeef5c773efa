"""Resumable stages: ingest, resolve, fetch, analyze, atlas.

Each stage reads its predecessors' files under the output directory, writes its
own files atomically and records completion in ``manifest.json``.
"""

from __future__ import annotations

import contextlib
import csv
import io
import json
import logging
import os
import tempfile
from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable

from . import atlas as atlas_mod
from . import corpus as corpus_mod
from . import links, metrics, resolver
from .config import RunConfig
from .figures import figure_tables
from .metadata import MetadataClient, NotFound, RequestCache, TokenBucket, TransportError, make_transport
from .records import PaperRecord

log = logging.getLogger(__name__)

STAGES = ("ingest", "resolve", "fetch", "analyze", "atlas")
# actual data dependencies; atlas only needs the fetched records
REQUIRES = {"ingest": (), "resolve": ("ingest",), "fetch": ("resolve",),
            "analyze": ("fetch",), "atlas": ("fetch",)}
DOWNSTREAM = {"ingest": ("resolve", "fetch", "analyze", "atlas"), "resolve": ("fetch", "analyze", "atlas"),
              "fetch": ("analyze", "atlas"), "analyze": (), "atlas": ()}

TABLE_FILES = {
    "works_ref": ("works_ref.csv", links.WorkRow),
    "works_cit": ("works_cit.csv", links.WorkRow),
    "authors_ref": ("authors_ref.csv", links.AuthorRow),
    "authors_cit": ("authors_cit.csv", links.AuthorRow),
    "corpus": ("corpus.csv", links.CorpusRow),
}


class DataError(Exception):
    """Bad or missing input data (exit code 2)."""


class StageMissing(DataError):
    pass


# Atomic files ------------------------------------------------------------------

@contextlib.contextmanager
def atomic_path(path: Path):
    """Yield a temp path next to ``path``; it replaces ``path`` only if the block succeeds."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.stem + ".", suffix=path.suffix)
    os.close(fd)
    try:
        yield Path(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_text(path: Path, text: str) -> None:
    with atomic_path(path) as tmp:
        tmp.write_text(text, encoding="utf-8", newline="")


# Manifest ----------------------------------------------------------------------

class Manifest:
    def __init__(self, out_dir: Path):
        self.path = out_dir / "manifest.json"
        self.out_dir = out_dir
        self.data: dict[str, Any] = {"stages": {}}
        if self.path.exists():
            try:
                self.data = json.loads(self.path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                log.warning("unreadable manifest %s; treating every stage as pending", self.path)

    def entry(self, stage: str) -> dict[str, Any] | None:
        return self.data["stages"].get(stage)

    def is_done(self, stage: str, params: dict[str, Any]) -> bool:
        e = self.entry(stage)
        if not e or e.get("params") != params:
            return False
        return all((self.out_dir / p).exists() for p in e.get("outputs", []))

    def complete(self, stage: str, params: dict[str, Any], outputs: list[Path], stats: dict | None = None) -> None:
        for d in DOWNSTREAM[stage]:
            self.data["stages"].pop(d, None)
        self.data["stages"][stage] = {
            "params": params,
            "outputs": sorted(str(p.relative_to(self.out_dir)) for p in outputs),
            "stats": stats or {},
        }
        self.save()

    def save(self) -> None:
        write_text(self.path, json.dumps(self.data, indent=2, sort_keys=True) + "\n")


def _stage_dir(cfg: RunConfig, stage: str) -> Path:
    return cfg.out_dir / stage


def _require(cfg: RunConfig, manifest: Manifest, stage: str) -> None:
    for pre in REQUIRES[stage]:
        e = manifest.entry(pre)
        if e is None or not all((cfg.out_dir / p).exists() for p in e.get("outputs", [])):
            raise StageMissing(f"stage '{stage}' needs the outputs of '{pre}' in {cfg.out_dir}; "
                               f"run `proclens {pre}` (or `proclens run`) first")


# Client ------------------------------------------------------------------------

def make_client(cfg: RunConfig) -> MetadataClient:
    transport = make_transport(cfg.backend)
    # the public service is throttled; local fixtures are not
    limiter = TokenBucket(cfg.rate, cfg.burst) if cfg.backend == "live" else None
    return MetadataClient(transport, RequestCache(cfg.cache_dir, refresh=cfg.refresh), limiter)


def _stats(client: MetadataClient) -> dict[str, int]:
    return {k: int(client.stats.get(k, 0)) for k in ("network_requests", "cache_hits", "retries")}


# Stages ------------------------------------------------------------------------

def run_ingest(cfg: RunConfig, manifest: Manifest) -> dict[str, Any]:
    cfg.validate(need_corpus=True)
    params = {"corpus": str(cfg.corpus_path), "corpus_sha256": _file_hash(cfg.corpus_path)}
    if not cfg.force and manifest.is_done("ingest", params):
        return {"skipped": True}
    try:
        entries = corpus_mod.read_bibliography(cfg.corpus_path)
    except corpus_mod.BibtexParseError as exc:
        raise DataError(f"{cfg.corpus_path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"{cfg.corpus_path}: {exc}") from exc
    out = _stage_dir(cfg, "ingest") / "corpus.csv"
    with atomic_path(out) as tmp:
        corpus_mod.write_corpus_csv(entries, tmp)
    stats = {"entries": len(entries), "malformed": sum(e.malformed for e in entries)}
    manifest.complete("ingest", params, [out], stats)
    return stats


def run_resolve(cfg: RunConfig, manifest: Manifest, client: MetadataClient | None = None,
                input_fn: Callable[[str], str] = input) -> dict[str, Any]:
    _require(cfg, manifest, "resolve")
    cfg.validate(need_backend=client is None)
    ov_path, ex_path = cfg.overrides, cfg.exclusions
    params = {"backend": cfg.backend, "venue_token": cfg.venue_token,
              "overrides_sha256": _file_hash(ov_path), "exclusions_sha256": _file_hash(ex_path)}
    if not cfg.force and not cfg.interactive and manifest.is_done("resolve", params):
        return {"skipped": True}
    entries = corpus_mod.read_corpus_csv(cfg.out_dir / "ingest" / "corpus.csv")
    try:
        overrides = resolver.load_overrides(ov_path, ex_path)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    client = client or make_client(cfg)
    outcomes, summary = resolver.resolve_corpus(entries, client, overrides, cfg.venue_token, cfg.workers)

    if cfg.interactive:
        by_key = {e.entry_key: e for e in entries}
        added = 0
        for o in outcomes:
            if o.status != resolver.NEEDS_MANUAL:
                continue
            e = by_key[o.entry_key]
            answer = input_fn(f"{o.entry_key} ({e.year}) {e.title!r}: paper id (blank to skip): ").strip()
            if answer:
                overrides.manual_ids[o.entry_key] = answer
                o.status, o.paper_id, o.rung_used, o.note = resolver.RESOLVED, answer, None, "manual override"
                added += 1
        if added:
            with atomic_path(ov_path) as tmp:
                resolver.write_overrides(overrides, tmp)
            params["overrides_sha256"] = _file_hash(ov_path)
            summary = resolver.summarize(outcomes, summary.collisions)

    d = _stage_dir(cfg, "resolve")
    res_path, manual_path, cov_path = d / "resolution.csv", d / "needs_manual.csv", d / "coverage.json"
    with atomic_path(res_path) as tmp:
        resolver.write_resolution(outcomes, tmp)
    with atomic_path(manual_path) as tmp:
        resolver.write_resolution([o for o in outcomes if o.status == resolver.NEEDS_MANUAL], tmp)
    write_text(cov_path, json.dumps(asdict(summary), indent=2, sort_keys=True) + "\n")
    if summary.counts[resolver.FAILED]:
        # partial results stay on disk for inspection but the stage is not complete
        raise TransportError(f"{summary.counts[resolver.FAILED]} entries failed to resolve; "
                             f"see {res_path} and re-run `proclens resolve`")
    stats = {**_stats(client), "coverage": summary.coverage, **summary.counts}
    manifest.complete("resolve", params, [res_path, manual_path, cov_path], stats)
    return stats


def run_fetch(cfg: RunConfig, manifest: Manifest, client: MetadataClient | None = None) -> dict[str, Any]:
    _require(cfg, manifest, "fetch")
    cfg.validate(need_backend=client is None)
    params = {"backend": cfg.backend, "page_size": cfg.page_size,
              "resolution_sha256": _file_hash(cfg.out_dir / "resolve" / "resolution.csv")}
    if not cfg.force and manifest.is_done("fetch", params):
        return {"skipped": True}
    entries = corpus_mod.read_corpus_csv(cfg.out_dir / "ingest" / "corpus.csv")
    outcomes = resolver.read_resolution(cfg.out_dir / "resolve" / "resolution.csv")
    client = client or make_client(cfg)

    years: dict[str, int] = {}
    entry_year = {e.entry_key: e.year for e in entries}
    ids: list[str] = []
    for o in outcomes:
        if o.status == resolver.RESOLVED and o.paper_id not in years:
            ids.append(o.paper_id)
            if entry_year.get(o.entry_key) is not None:
                years[o.paper_id] = entry_year[o.entry_key]
    records: dict[str, PaperRecord] = {}
    for pid in ids:
        try:
            records[pid] = client.fetch_record(pid, cfg.page_size)
        except NotFound as exc:
            raise DataError(f"paper {pid} not found at the backend; fix overrides.csv ({exc})") from exc
    recs = [records[p] for p in ids]

    quality = links.DataQuality()
    corpus_ids = set(ids)
    tables = metrics.Tables(
        works_ref=links.mark_corpus_membership(links.consolidate_works(recs, "references", years, quality), corpus_ids),
        works_cit=links.mark_corpus_membership(links.consolidate_works(recs, "citations", years, quality), corpus_ids),
        authors_ref=links.consolidate_authors(recs, "references", years, quality),
        authors_cit=links.consolidate_authors(recs, "citations", years),
        corpus=links.build_corpus_table(entries, outcomes, records),
    )
    d = _stage_dir(cfg, "fetch")
    outputs = []
    papers = d / "papers.jsonl"
    write_text(papers, "".join(json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False) + "\n" for r in recs))
    outputs.append(papers)
    for attr, (name, row_type) in TABLE_FILES.items():
        p = d / name
        with atomic_path(p) as tmp:
            links.persist(getattr(tables, attr), tmp, row_type)
        outputs.append(p)
    qual = d / "data_quality.json"
    q = quality.as_dict()
    q["truncated_references"] = sorted(r.paper_id for r in recs if r.references_truncated)
    q["truncated_citations"] = sorted(r.paper_id for r in recs if r.citations_truncated)
    write_text(qual, json.dumps(q, indent=2, sort_keys=True) + "\n")
    outputs.append(qual)
    stats = {**_stats(client), "papers": len(recs)}
    manifest.complete("fetch", params, outputs, stats)
    return stats


def load_tables(out_dir: Path) -> metrics.Tables:
    d = out_dir / "fetch"
    kwargs = {}
    for attr, (name, row_type) in TABLE_FILES.items():
        try:
            kwargs[attr] = links.load(d / name, row_type)
        except FileNotFoundError as exc:
            raise StageMissing(f"{d / name} is missing; run `proclens fetch` first") from exc
        except ValueError as exc:
            raise DataError(str(exc)) from exc
    return metrics.Tables(**kwargs)


def run_analyze(cfg: RunConfig, manifest: Manifest) -> dict[str, Any]:
    _require(cfg, manifest, "analyze")
    cfg.validate()
    params = {"top_n": cfg.top_n, "mass": cfg.mass, "merge_by_name": cfg.merge_by_name,
              "fetch": manifest.entry("fetch").get("params")}
    if not cfg.force and manifest.is_done("analyze", params):
        return {"skipped": True}
    tables = load_tables(cfg.out_dir)
    quality = json.loads((cfg.out_dir / "fetch" / "data_quality.json").read_text(encoding="utf-8"))
    report = metrics.build_report(tables, cfg.top_n, cfg.mass, cfg.merge_by_name, quality)
    outputs = write_report(report, _stage_dir(cfg, "analyze"))
    manifest.complete("analyze", params, outputs, {"sub_reports": len(flatten_report(report))})
    return {"outputs": len(outputs)}


def run_atlas(cfg: RunConfig, manifest: Manifest) -> dict[str, Any]:
    from .plotting import render_atlas

    _require(cfg, manifest, "atlas")
    cfg.validate()
    params = {"years": cfg.atlas_years, "perplexity": cfg.perplexity, "seed": cfg.seed,
              "iterations": cfg.iterations, "fetch": manifest.entry("fetch").get("params")}
    if not cfg.force and manifest.is_done("atlas", params):
        return {"skipped": True}
    try:
        years = atlas_mod.parse_year_range(cfg.atlas_years)
    except ValueError as exc:
        raise DataError(f"bad atlas year range {cfg.atlas_years!r}; use e.g. 2001..2020") from exc
    corpus = links.load(cfg.out_dir / "fetch" / "corpus.csv", links.CorpusRow)
    embeddings = {}
    with open(cfg.out_dir / "fetch" / "papers.jsonl", encoding="utf-8") as fh:
        for line in fh:
            doc = json.loads(line)
            if doc.get("embedding"):
                embeddings[doc["paper_id"]] = doc["embedding"]
    try:
        points, kl = atlas_mod.make_atlas(corpus, embeddings, years, cfg.perplexity, cfg.seed, cfg.iterations)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    d = _stage_dir(cfg, "atlas")
    csv_path, svg_path, kl_path = d / "atlas.csv", d / "atlas.svg", d / "kl_trace.csv"
    write_text(csv_path, atlas_mod.atlas_csv(points))
    write_text(kl_path, "iteration,kl\r\n" + "".join(f"{i},{v!r}\r\n" for i, v in enumerate(kl)))
    with atomic_path(svg_path) as tmp:
        render_atlas(points, tmp)
    manifest.complete("atlas", params, [csv_path, svg_path, kl_path],
                      {"points": len(points), "final_kl": kl[-1] if kl else None})
    return {"points": len(points)}


def run_all(cfg: RunConfig, client: MetadataClient | None = None,
            input_fn: Callable[[str], str] = input) -> dict[str, dict[str, Any]]:
    manifest = Manifest(cfg.out_dir)
    cfg.validate(need_corpus=True, need_backend=client is None)
    client = client or make_client(cfg)
    return {
        "ingest": run_ingest(cfg, manifest),
        "resolve": run_resolve(cfg, manifest, client, input_fn),
        "fetch": run_fetch(cfg, manifest, client),
        "analyze": run_analyze(cfg, manifest),
        "atlas": run_atlas(cfg, manifest),
    }


# Report files ------------------------------------------------------------------

def flatten_report(report: dict[str, Any]) -> dict[str, dict[str, Any]]:
    """Leaf sub-reports keyed by a file-safe name, e.g. ``venue_rankings_references``."""
    out: dict[str, dict[str, Any]] = {}
    for name, node in report.items():
        if "data" in node and "filter" in node:
            out[name] = node
        else:
            for sub, leaf in node.items():
                out[f"{name}_{sub}"] = leaf
    return out


def _cell(v: Any) -> Any:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True, ensure_ascii=False)
    return v


def _table(rows: list[dict[str, Any]]) -> str:
    buf = io.StringIO()
    cols: list[str] = []
    for r in rows:
        cols += [k for k in r if k not in cols]
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def sub_report_csv(data: Any) -> str:
    """Tabular view of one sub-report's data."""
    if isinstance(data, list):
        if data and isinstance(data[0], dict):
            return _table(data)
        return _table([{"value": v} for v in data])
    if isinstance(data, dict):
        for key in ("per_year", "ranking", "rows", "histogram"):
            v = data.get(key)
            if isinstance(v, list):
                if v and not isinstance(v[0], dict):
                    return _table([{"value": a, "count": b} for a, b in v])
                return _table(v)
        if isinstance(data.get("per_tag"), dict):
            return _table([{"tag": k, "pct": v} for k, v in data["per_tag"].items()])
        return _table([{"key": k, "value": v} for k, v in data.items()])
    return _table([{"value": data}])


def write_report(report: dict[str, Any], out_dir: Path) -> list[Path]:
    """report.json, one CSV per sub-report, and a CSV plus PNG per figure."""
    from .plotting import render_figure

    out_dir = Path(out_dir)
    outputs = []
    p = out_dir / "report.json"
    write_text(p, json.dumps(report, indent=2, ensure_ascii=False) + "\n")
    outputs.append(p)
    for name, leaf in flatten_report(report).items():
        p = out_dir / f"{name}.csv"
        write_text(p, sub_report_csv(leaf["data"]))
        outputs.append(p)
    for fig in figure_tables(report):
        p = out_dir / f"{fig.name}.csv"
        write_text(p, fig.to_csv())
        png = out_dir / f"{fig.name}.png"
        with atomic_path(png) as tmp:
            render_figure(fig, tmp)
        outputs += [p, png]
    return outputs


def _file_hash(path: Path | None) -> str | None:
    import hashlib

    if path is None or not Path(path).is_file():
        return None
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
