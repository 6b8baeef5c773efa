"""2D atlas of corpus papers from their document embeddings."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .links import CorpusRow
from .tsne import tsne

MIN_MARKER = 4.0
MARKER_PER_CITATION = 1.0
ATLAS_COLUMNS = ["paper_id", "x", "y", "year", "citations"]


@dataclass
class EmbeddingMatrix:
    ids: list[str]
    X: np.ndarray
    years: list[int]
    citation_counts: list[int]

    def __post_init__(self):
        if self.X.shape[0] != len(self.ids):
            raise ValueError("row count does not match ids")


@dataclass
class AtlasPoint:
    paper_id: str
    x: float
    y: float
    year: int
    citations: int
    size: float


def parse_year_range(spec: str | None) -> tuple[int | None, int | None] | None:
    """``"2001..2020"``, ``"..2020"``, ``"2005"`` or empty for no filter."""
    if not spec:
        return None
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return (int(lo) if lo else None, int(hi) if hi else None)
    return (int(spec), int(spec))


def _keep(year: int | None, years: tuple[int | None, int | None] | None) -> bool:
    if years is None:
        return True
    if year is None:
        return False
    lo, hi = years
    return (lo is None or year >= lo) and (hi is None or year <= hi)


def embedding_matrix(corpus: list[CorpusRow], embeddings: dict[str, list[float]],
                     years: tuple[int | None, int | None] | None = None) -> EmbeddingMatrix:
    """Rows for resolved papers with an embedding inside the year window, in corpus order."""
    ids, rows, ys, cits = [], [], [], []
    for r in corpus:
        if not r.paper_id or r.paper_id not in embeddings or not _keep(r.year, years):
            continue
        ids.append(r.paper_id)
        rows.append(embeddings[r.paper_id])
        ys.append(r.year)
        cits.append(r.citation_count)
    X = np.asarray(rows, dtype=float) if rows else np.empty((0, 0))
    return EmbeddingMatrix(ids, X, ys, cits)


def make_atlas(corpus: list[CorpusRow], embeddings: dict[str, list[float]],
               years: tuple[int | None, int | None] | None = None, perplexity: float = 30.0,
               seed: int = 0, iters: int = 1000, **tsne_kwargs) -> tuple[list[AtlasPoint], list[float]]:
    """Filter, embed and size the papers. The year filter applies before optimization.

    Returns the points and the KL trace.
    """
    m = embedding_matrix(corpus, embeddings, years)
    if not m.ids:
        raise ValueError("no papers with embeddings in the selected years")
    if len(m.ids) < 5:
        raise ValueError(f"t-SNE needs at least 5 papers, got {len(m.ids)}")
    res = tsne(m.X, perplexity=perplexity, seed=seed, iters=iters, ids=m.ids, **tsne_kwargs)
    points = [AtlasPoint(pid, float(x), float(y), yr, c, MIN_MARKER + MARKER_PER_CITATION * c)
              for pid, (x, y), yr, c in zip(m.ids, res.Y, m.years, m.citation_counts)]
    return points, res.kl


def atlas_csv(points: list[AtlasPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(ATLAS_COLUMNS)
    for p in points:
        w.writerow([p.paper_id, repr(p.x), repr(p.y), p.year, p.citations])
    return buf.getvalue()
