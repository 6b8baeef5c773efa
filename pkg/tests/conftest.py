from __future__ import annotations

import shutil
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from oracle import FIXTURE, Oracle  # noqa: E402

from proclens import pipeline  # noqa: E402
from proclens.config import load_config  # noqa: E402


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURE


@pytest.fixture(scope="session")
def oracle() -> Oracle:
    return Oracle(FIXTURE)


def fixture_config(out: Path, cache: Path, **overrides):
    return load_config(FIXTURE / "proclens.toml", {"out_dir": out, "cache_dir": cache, **overrides})


@pytest.fixture(scope="session")
def fixture_run(tmp_path_factory):
    """One full pipeline run over fixture30; returns (out_dir, seconds, stage stats)."""
    root = tmp_path_factory.mktemp("fixture_run")
    cfg = fixture_config(root / "out", root / "cache")
    t0 = time.perf_counter()
    stats = pipeline.run_all(cfg)
    elapsed = time.perf_counter() - t0
    return cfg.out_dir, elapsed, stats


@pytest.fixture(scope="session")
def tables(fixture_run):
    return pipeline.load_tables(fixture_run[0])


@pytest.fixture
def fixture_copy(tmp_path) -> Path:
    dst = tmp_path / "fixture30"
    shutil.copytree(FIXTURE, dst, ignore=shutil.ignore_patterns("out", ".proclens-cache"))
    return dst


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
