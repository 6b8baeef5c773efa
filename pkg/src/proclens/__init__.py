"""Bibliometric analysis of proceedings corpora: references, citations, rankings and embedding atlases."""

__version__ = "0.1.0"
