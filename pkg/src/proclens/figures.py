"""Plot-ready (x, y, series) tables derived from a metrics report."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any


@dataclass
class FigureData:
    name: str
    title: str
    xlabel: str
    ylabel: str
    kind: str  # "line", "bar" or "barh"
    rows: list[tuple[Any, Any, str]] = field(default_factory=list)
    secondary: tuple[str, ...] = ()
    ylabel2: str = ""

    def series(self) -> list[str]:
        seen: list[str] = []
        for _, _, s in self.rows:
            if s not in seen:
                seen.append(s)
        return seen

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["x", "y", "series"])
        for x, y, s in self.rows:
            w.writerow([x, "" if y is None else (repr(y) if isinstance(y, float) else y), s])
        return buf.getvalue()


def _data(report: dict, *path: str) -> Any:
    node = report
    for p in path:
        node = node[p]
    return node["data"]


def _rates(name: str, data: dict, what: str) -> FigureData:
    fig = FigureData(name, f"Share of {what} inside the corpus", "Proceedings year", "%", "line")
    for r in data["per_year"]:
        fig.rows.append((r["year"], r["work_level_pct"], "corpus works"))
    for r in data["per_year"]:
        fig.rows.append((r["year"], r["author_level_pct"], "corpus authors"))
    return fig


def _ages(name: str, data: dict, what: str) -> FigureData:
    fig = FigureData(name, f"Relative age of {what}", "Years", "Links", "bar")
    fig.rows = [(age, n, what) for age, n in data["histogram"]]
    return fig


def _tags(name: str, report: dict, populations: list[tuple[str, str]]) -> FigureData:
    fig = FigureData(name, "Field-of-study tags", "Tag", "% of items", "bar")
    for pop, label in populations:
        for tag, pct in _data(report, "field_tags", pop)["per_tag"].items():
            fig.rows.append((tag, pct, label))
    return fig


def _venues(name: str, data: dict, what: str) -> FigureData:
    fig = FigureData(name, f"Top venues ({what})", "Venue", "Links", "barh")
    fig.rows = [(r["venue"], r["count"], what) for r in data["ranking"]]
    return fig


def figure_tables(report: dict) -> list[FigureData]:
    figs = []

    f1 = FigureData("fig1", "Corpus papers per year", "Proceedings year", "Papers", "line")
    ppy = _data(report, "papers_per_year")
    for key, label in (("papers", "papers"), ("indexed", "indexed"), ("complete", "complete references")):
        f1.rows += [(r["year"], r[key], label) for r in ppy]
    figs.append(f1)

    f2 = FigureData("fig2", "References per proceedings year", "Proceedings year", "References", "line",
                    secondary=("average per paper",), ylabel2="Average per paper")
    yrs = _data(report, "yearly_ref_stats")
    for key, label in (("total", "total"), ("new_unique", "new"), ("avg_per_paper", "average per paper")):
        f2.rows += [(r["year"], r[key], label) for r in yrs]
    figs.append(f2)

    figs.append(_rates("fig3", _data(report, "self_link_rates", "references"), "references"))
    figs.append(_ages("fig5", _data(report, "relative_age", "references"), "references"))
    figs.append(_tags("fig6", report, [("refs", "references"), ("internal_refs", "internal references"),
                                      ("corpus", "corpus")]))
    figs.append(_venues("fig7", _data(report, "venue_rankings", "references"), "references"))
    figs.append(_rates("fig10", _data(report, "self_link_rates", "citations"), "citations"))

    f11 = FigureData("fig11", "Papers by citations received", "Citations", "Papers", "bar")
    f11.rows = [(c, k, "papers") for c, k in _data(report, "citation_histogram")["histogram"]]
    figs.append(f11)

    figs.append(_ages("fig12", _data(report, "relative_age", "citations"), "citations"))
    figs.append(_tags("fig13", report, [("cits", "citations"), ("internal_cits", "internal citations"),
                                       ("corpus", "corpus")]))
    figs.append(_venues("fig14", _data(report, "venue_rankings", "citations"), "citations"))
    return figs
