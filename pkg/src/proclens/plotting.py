"""Matplotlib rendering of figure tables and the embedding atlas."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .atlas import AtlasPoint  # noqa: E402
from .figures import FigureData  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "proclens",
    "svg.fonttype": "none",
}
# keeps output files byte-identical between runs
_METADATA = {"png": {"Software": None}, "svg": {"Date": None, "Creator": None}}


def _save(fig, path: Path) -> None:
    fmt = path.suffix.lstrip(".")
    fig.savefig(path, format=fmt, dpi=120, metadata=_METADATA.get(fmt), bbox_inches="tight")
    plt.close(fig)


def render_figure(data: FigureData, path: str | Path) -> None:
    path = Path(path)
    with plt.rc_context(STYLE):
        height = max(3.0, 0.22 * len({x for x, _, _ in data.rows})) if data.kind == "barh" else 3.2
        fig, ax = plt.subplots(figsize=(6.4, height))
        ax2 = ax.twinx() if data.secondary else None
        series = data.series()
        if data.kind == "line":
            for s in series:
                pts = [(x, y) for x, y, ss in data.rows if ss == s and y is not None]
                target = ax2 if s in data.secondary else ax
                target.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=s,
                            linestyle="--" if target is ax2 else "-")
        else:
            cats: list = []
            for x, _, _ in data.rows:
                if x not in cats:
                    cats.append(x)
            numeric = all(isinstance(c, (int, float)) for c in cats)
            width = 0.8 / max(1, len(series))
            for k, s in enumerate(series):
                vals = {x: y for x, y, ss in data.rows if ss == s}
                pos = [(c if numeric else i) + (k - (len(series) - 1) / 2) * width for i, c in enumerate(cats)]
                heights = [vals.get(c) or 0 for c in cats]
                if data.kind == "barh":
                    ax.barh(pos, heights, height=width, label=s)
                else:
                    ax.bar(pos, heights, width=width, label=s)
            if not numeric:
                ticks = list(range(len(cats)))
                if data.kind == "barh":
                    ax.set_yticks(ticks)
                    ax.set_yticklabels(cats)
                    ax.invert_yaxis()
                else:
                    ax.set_xticks(ticks)
                    ax.set_xticklabels(cats, rotation=45, ha="right")
        ax.set_title(data.title)
        if data.kind == "barh":
            ax.set_xlabel(data.ylabel)
        else:
            ax.set_xlabel(data.xlabel)
            ax.set_ylabel(data.ylabel)
        if ax2 is not None:
            ax2.set_ylabel(data.ylabel2)
            ax2.spines["right"].set_visible(True)
        handles, labels = ax.get_legend_handles_labels()
        if ax2 is not None:
            h2, l2 = ax2.get_legend_handles_labels()
            handles, labels = handles + h2, labels + l2
        if len(labels) > 1:
            ax.legend(handles, labels, frameon=False, fontsize=8)
        _save(fig, path)


def render_atlas(points: list[AtlasPoint], path: str | Path, title: str = "Corpus embedding atlas") -> None:
    """Scatter coloured by publication year, marker area proportional to citations."""
    path = Path(path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.4, 5.6))
        sc = ax.scatter([p.x for p in points], [p.y for p in points], s=[p.size for p in points],
                        c=[p.year for p in points], cmap="viridis", alpha=0.75, linewidths=0)
        cb = fig.colorbar(sc, ax=ax)
        cb.set_label("Publication year")
        ax.set_xticks([])
        ax.set_yticks([])
        ax.set_title(title)
        _save(fig, path)
