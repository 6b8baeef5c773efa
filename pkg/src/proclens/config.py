"""Run configuration: a TOML file plus command-line overrides (flags win)."""

from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_CACHE_DIR = ".proclens-cache"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    corpus_path: Path | None = None
    backend: str = "live"
    cache_dir: Path = Path(DEFAULT_CACHE_DIR)
    venue_token: str = ""
    rate: float = 1.0
    burst: int = 3
    top_n: int = 40
    mass: float = 0.5
    atlas_years: str | None = None
    perplexity: float = 30.0
    iterations: int = 1000
    seed: int = 0
    out_dir: Path = Path("proclens-out")
    overrides_path: Path | None = None
    exclusions_path: Path | None = None
    page_size: int = 100
    workers: int = 1
    refresh: bool = False
    interactive: bool = False
    force: bool = False
    merge_by_name: bool = False

    @property
    def overrides(self) -> Path | None:
        if self.overrides_path is not None:
            return self.overrides_path
        return self.corpus_path.parent / "overrides.csv" if self.corpus_path else None

    @property
    def exclusions(self) -> Path | None:
        if self.exclusions_path is not None:
            return self.exclusions_path
        return self.corpus_path.parent / "exclusions.csv" if self.corpus_path else None

    def validate(self, need_corpus: bool = False, need_backend: bool = False) -> None:
        """Check paths up front so no stage fails halfway through network work."""
        if need_corpus:
            if self.corpus_path is None:
                raise ConfigError("no corpus given (--corpus or corpus_path in the config file)")
            if not self.corpus_path.is_file():
                raise ConfigError(f"corpus file {self.corpus_path} does not exist")
        if need_backend:
            if self.backend.startswith("fixture:"):
                d = Path(self.backend.split(":", 1)[1])
                if not (d / "papers").is_dir():
                    raise ConfigError(f"fixture backend {d} has no papers/ directory")
            elif self.backend != "live":
                raise ConfigError(f"unknown backend {self.backend!r}; use 'live' or 'fixture:<dir>'")
            _writable_dir(self.cache_dir, "cache directory")
        for p, what in ((self.overrides_path, "overrides"), (self.exclusions_path, "exclusions")):
            if p is not None and p.exists() and not p.is_file():
                raise ConfigError(f"{what} path {p} is not a file")
        _writable_dir(self.out_dir, "output directory")
        if self.top_n < 1 or self.page_size < 1 or self.burst < 1 or self.rate <= 0:
            raise ConfigError("top_n, page_size and burst must be >= 1 and rate > 0")


def _writable_dir(path: Path, what: str) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create {what} {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigError(f"{what} {path} is not writable")


_PATH_FIELDS = {"corpus_path", "cache_dir", "out_dir", "overrides_path", "exclusions_path"}
_ALIASES = {"corpus": "corpus_path", "cache": "cache_dir", "out": "out_dir", "output_dir": "out_dir",
            "overrides": "overrides_path", "exclusions": "exclusions_path", "iters": "iterations"}


def _resolve_backend(value: str, base: Path) -> str:
    if value.startswith("fixture:"):
        p = Path(value.split(":", 1)[1])
        return "fixture:" + str(p if p.is_absolute() else base / p)
    return value


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Read ``path`` (relative paths resolve against its directory) and apply non-None overrides."""
    values: dict[str, Any] = {}
    names = {f.name for f in dataclasses.fields(RunConfig)}
    if path is not None:
        path = Path(path)
        try:
            raw = tomllib.loads(path.read_text(encoding="utf-8"))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        flat: dict[str, Any] = {}
        for k, v in raw.items():
            if isinstance(v, dict):
                flat.update(v)
            else:
                flat[k] = v
        base = path.parent.resolve()
        for k, v in flat.items():
            k = _ALIASES.get(k, k)
            if k not in names:
                raise ConfigError(f"{path}: unknown setting {k!r}")
            if k in _PATH_FIELDS:
                v = Path(v) if Path(v).is_absolute() else base / v
            elif k == "backend":
                v = _resolve_backend(v, base)
            values[k] = v
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k in _PATH_FIELDS:
            v = Path(v)
        values[k] = v
    cfg = RunConfig(**values)
    return cfg
