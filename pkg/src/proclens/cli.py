"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 transport failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, pipeline
from .config import ConfigError, load_config
from .metadata import TransportError
from .query import QueryError, parse_query, query_csv, run_query

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRANSPORT = 0, 1, 2, 3

log = logging.getLogger("proclens")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run options (override the config file)")
    g.add_argument("--config", type=Path, help="TOML run configuration")
    g.add_argument("--out", dest="out_dir", help="output directory")
    g.add_argument("--corpus", dest="corpus_path", help="BibTeX corpus file")
    g.add_argument("--backend", help="'live' or 'fixture:<dir>'")
    g.add_argument("--cache-dir", dest="cache_dir")
    g.add_argument("--venue-token", dest="venue_token")
    g.add_argument("--overrides", dest="overrides_path")
    g.add_argument("--exclusions", dest="exclusions_path")
    g.add_argument("--rate", type=float, help="requests per second")
    g.add_argument("--burst", type=int)
    g.add_argument("--page-size", dest="page_size", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--top-n", dest="top_n", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--perplexity", type=float)
    g.add_argument("--iterations", type=int)
    g.add_argument("--atlas-years", dest="atlas_years", help="e.g. 2001..2020")
    g.add_argument("--refresh", action="store_true", default=None, help="bypass the request cache")
    g.add_argument("--force", action="store_true", default=None, help="re-run completed stages")
    g.add_argument("--interactive", action="store_true", default=None,
                   help="prompt for paper ids of unresolved entries")
    g.add_argument("--merge-by-name", dest="merge_by_name", action="store_true", default=None)
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="proclens", description="Citation and reference analysis of a proceedings corpus.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("ingest", parents=[common], help="parse the BibTeX corpus")
    sub.add_parser("resolve", parents=[common], help="match entries to backend paper ids")
    sub.add_parser("fetch", parents=[common], help="download metadata and build link tables")
    sub.add_parser("analyze", parents=[common], help="compute metrics, CSV tables and figures")
    sub.add_parser("atlas", parents=[common], help="2D embedding map of the corpus")
    sub.add_parser("run", parents=[common], help="all stages in order")
    q = sub.add_parser("query", parents=[common], help="filter link tables, CSV on stdout",
                       description="Terms: author=, venue=, field=, year=A..B, direction=ref|cit, "
                                   "table=works|authors, in_corpus=true|false, sort=, top=")
    q.add_argument("terms", nargs="*", help="key=value terms")
    return parser


_CONFIG_KEYS = ("out_dir", "corpus_path", "backend", "cache_dir", "venue_token", "overrides_path",
                "exclusions_path", "rate", "burst", "page_size", "workers", "top_n", "seed", "perplexity",
                "iterations", "atlas_years", "refresh", "force", "interactive", "merge_by_name")


def main(argv: list[str] | None = None, input_fn=input) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, {k: getattr(args, k) for k in _CONFIG_KEYS})
        if args.command == "query":
            q = parse_query(args.terms)
            cols, rows = run_query(q, pipeline.load_tables(cfg.out_dir))
            sys.stdout.write(query_csv(cols, rows))
            return EXIT_OK
        manifest = pipeline.Manifest(cfg.out_dir)
        if args.command == "run":
            results = pipeline.run_all(cfg, input_fn=input_fn)
        else:
            stage = getattr(pipeline, f"run_{args.command}")
            kwargs = {"input_fn": input_fn} if args.command == "resolve" else {}
            results = {args.command: stage(cfg, manifest, **kwargs)}
        for name, stats in results.items():
            if stats.get("skipped"):
                print(f"{name}: already complete (use --force to re-run)")
            else:
                print(f"{name}: " + ", ".join(f"{k}={v}" for k, v in stats.items()))
        return EXIT_OK
    except (ConfigError, QueryError) as exc:
        print(f"proclens: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except pipeline.DataError as exc:
        print(f"proclens: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TransportError as exc:
        print(f"proclens: backend unavailable: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())
