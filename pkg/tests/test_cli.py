from __future__ import annotations

import csv
import io
import json

import pytest
from conftest import fixture_config

from proclens import pipeline
from proclens.cli import main
from proclens.metadata import FixtureTransport, MetadataClient

FIGURES = ("fig1", "fig2", "fig3", "fig5", "fig6", "fig7", "fig10", "fig11", "fig12", "fig13", "fig14")


def cli(fixture_dir, out, cache, *args, input_fn=input):
    return main([args[0], "--config", str(fixture_dir / "proclens.toml"), "--out", str(out),
                 "--cache-dir", str(cache), *args[1:]], input_fn=input_fn)


def outputs(out):
    return {str(p.relative_to(out)): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}


# golden outputs --------------------------------------------------------------------

@pytest.mark.parametrize("name", FIGURES)
def test_figure_csv_matches_oracle(fixture_run, oracle, name):
    got = (fixture_run[0] / "analyze" / f"{name}.csv").read_bytes().decode("utf-8")
    assert got == oracle.figure_csvs(top_n=10)[name]
    assert (fixture_run[0] / "analyze" / f"{name}.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_report_values_match_oracle(fixture_run, oracle):
    report = json.loads((fixture_run[0] / "analyze" / "report.json").read_text(encoding="utf-8"))
    refs = report["self_link_rates"]["references"]["data"]["overall"]
    assert refs["work_level_pct"] == pytest.approx(oracle.self_rates("references")[0], abs=1e-9)
    assert refs["author_level_pct"] == pytest.approx(oracle.self_rates("references")[1], abs=1e-9)
    summary = report["corpus_summary"]["data"]
    assert summary["avg_references_per_paper"] == pytest.approx(oracle.summary()["avg_refs"], abs=1e-9)
    assert report["concentration"]["data"]["paper_fraction"] == pytest.approx(oracle.concentration(0.5))
    cons = report["consistency"]["data"]
    assert cons["internal_ref_count"] == cons["internal_cit_count"] == 30
    ranking = report["work_rankings"]["citations"]["data"]
    assert [(r["work_id"], r["count"]) for r in ranking] == oracle.work_top("citations", 10)


def test_report_csvs_are_written_per_sub_report(fixture_run):
    d = fixture_run[0] / "analyze"
    rows = list(csv.DictReader(io.StringIO((d / "venue_rankings_references.csv").read_text(encoding="utf-8"))))
    assert len(rows) == 10
    assert (d / "corpus_summary.csv").exists() and (d / "work_rankings_references_external.csv").exists()


def test_atlas_points_match_oracle(fixture_run, oracle):
    text = (fixture_run[0] / "atlas" / "atlas.csv").read_text(encoding="utf-8")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [r["paper_id"] for r in rows] == [p for p in oracle.ids if oracle.papers[p].get("embedding")]
    for r in rows:
        assert int(r["year"]) == oracle.year[r["paper_id"]]
        assert int(r["citations"]) == oracle.papers[r["paper_id"]]["citationCount"]


def test_fixture_pipeline_stats(fixture_run):
    _, elapsed, stats = fixture_run
    assert stats["resolve"]["coverage"] == 1.0
    assert stats["fetch"]["papers"] == 30
    assert stats["atlas"]["points"] == 28
    assert elapsed < 30


# reproducibility and resumption -----------------------------------------------------

def test_same_cache_same_bytes(tmp_path, fixture_run):
    first_out = fixture_run[0]
    cfg = fixture_config(tmp_path / "out", first_out.parent / "cache")
    stats = pipeline.run_all(cfg)
    assert stats["resolve"]["network_requests"] == 0 and stats["fetch"]["network_requests"] == 0
    a, b = outputs(first_out), outputs(tmp_path / "out")
    assert a.keys() == b.keys()
    differing = [k for k in a if a[k] != b[k]]
    # only the manifest differs: it records cache hits versus network requests
    assert differing == ["manifest.json"]


def test_rerun_is_a_no_op_until_forced(tmp_path, fixture_dir, capsys):
    out, cache = tmp_path / "out", tmp_path / "cache"
    assert cli(fixture_dir, out, cache, "run") == 0
    capsys.readouterr()
    before = outputs(out)
    assert cli(fixture_dir, out, cache, "run") == 0
    text = capsys.readouterr().out
    assert text.count("already complete") == 5
    assert outputs(out) == before
    assert cli(fixture_dir, out, cache, "analyze", "--force") == 0
    assert "analyze: outputs=" in capsys.readouterr().out


def test_changed_parameter_reruns_only_affected_stages(tmp_path, fixture_dir, capsys):
    out, cache = tmp_path / "out", tmp_path / "cache"
    assert cli(fixture_dir, out, cache, "run", "--iterations", "300") == 0
    capsys.readouterr()
    assert cli(fixture_dir, out, cache, "run", "--iterations", "300", "--top-n", "5") == 0
    text = capsys.readouterr().out
    assert "fetch: already complete" in text and "atlas: already complete" in text
    assert "analyze: outputs=" in text
    fig7 = (out / "analyze" / "fig7.csv").read_text(encoding="utf-8")
    assert len(fig7.strip().splitlines()) == 1 + 5


def test_forced_fetch_invalidates_downstream(tmp_path, fixture_dir):
    cfg = fixture_config(tmp_path / "out", tmp_path / "cache", iterations=200)
    pipeline.run_all(cfg)
    m = pipeline.Manifest(cfg.out_dir)
    assert set(m.data["stages"]) == set(pipeline.STAGES)
    cfg.force = True
    pipeline.run_fetch(cfg, m)
    assert set(pipeline.Manifest(cfg.out_dir).data["stages"]) == {"ingest", "resolve", "fetch"}


def test_missing_predecessor_names_stage(tmp_path, fixture_dir, capsys):
    assert cli(fixture_dir, tmp_path / "out", tmp_path / "cache", "analyze") == 2
    err = capsys.readouterr().err
    assert "fetch" in err and "proclens fetch" in err


def test_atomic_write_keeps_old_file_on_failure(tmp_path):
    target = tmp_path / "x.csv"
    target.write_text("old", encoding="utf-8")
    with pytest.raises(RuntimeError):
        with pipeline.atomic_path(target) as tmp:
            tmp.write_text("half", encoding="utf-8")
            raise RuntimeError("boom")
    assert target.read_text(encoding="utf-8") == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["x.csv"]


# resolve ----------------------------------------------------------------------------

def test_needs_manual_written_without_prompting(fixture_copy, tmp_path):
    (fixture_copy / "overrides.csv").write_text("entry_key,paper_id\nF13,P013\n", encoding="utf-8")

    def no_prompt(_):
        raise AssertionError("prompted without --interactive")
    out = tmp_path / "out"
    assert main(["ingest", "--config", str(fixture_copy / "proclens.toml"), "--out", str(out)]) == 0
    assert main(["resolve", "--config", str(fixture_copy / "proclens.toml"), "--out", str(out)],
                input_fn=no_prompt) == 0
    manual = list(csv.DictReader(open(out / "resolve" / "needs_manual.csv", encoding="utf-8")))
    assert [r["entry_key"] for r in manual] == ["F22"]


def test_interactive_prompt_writes_override(fixture_copy, tmp_path):
    (fixture_copy / "overrides.csv").write_text("entry_key,paper_id\nF13,P013\n", encoding="utf-8")
    prompts = []

    def answer(prompt):
        prompts.append(prompt)
        return "P022"
    out = tmp_path / "out"
    cfg = ["--config", str(fixture_copy / "proclens.toml"), "--out", str(out)]
    assert main(["ingest", *cfg]) == 0
    assert main(["resolve", "--interactive", *cfg], input_fn=answer) == 0
    assert len(prompts) == 1 and prompts[0].startswith("F22")
    rows = list(csv.DictReader(open(fixture_copy / "overrides.csv", encoding="utf-8")))
    assert {r["entry_key"]: r["paper_id"] for r in rows} == {"F13": "P013", "F22": "P022"}
    coverage = json.loads((out / "resolve" / "coverage.json").read_text(encoding="utf-8"))
    assert coverage["coverage"] == 1.0


def test_transport_failure_exits_3(tmp_path, fixture_dir, monkeypatch, capsys):
    def failing_client(cfg):
        return MetadataClient(FixtureTransport.from_directory(fixture_dir, script=[503] * 10_000),
                              max_retries=1, backoff=0.0, sleep=lambda s: None)
    monkeypatch.setattr(pipeline, "make_client", failing_client)
    out = tmp_path / "out"
    assert cli(fixture_dir, out, tmp_path / "cache", "ingest") == 0
    assert cli(fixture_dir, out, tmp_path / "cache", "resolve") == 3
    assert "backend unavailable" in capsys.readouterr().err
    assert (out / "resolve" / "resolution.csv").exists()
    assert "resolve" not in pipeline.Manifest(out).data["stages"]


# exit codes ---------------------------------------------------------------------------

def test_bad_bibtex_exits_2(tmp_path, capsys):
    bib = tmp_path / "bad.bib"
    bib.write_text("@misc{x, title={never closed", encoding="utf-8")
    assert main(["ingest", "--corpus", str(bib), "--out", str(tmp_path / "out")]) == 2
    assert "offset" in capsys.readouterr().err


def test_unknown_config_key_exits_1(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('corpus = "x.bib"\ncolour = "blue"\n', encoding="utf-8")
    assert main(["ingest", "--config", str(cfg)]) == 1
    assert "colour" in capsys.readouterr().err


def test_missing_corpus_exits_1_before_network(tmp_path):
    assert main(["run", "--corpus", str(tmp_path / "nope.bib"), "--backend", "live",
                 "--out", str(tmp_path / "out")]) == 1
    assert not (tmp_path / "out" / "manifest.json").exists()


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1
    assert "usage" in capsys.readouterr().err


# query ---------------------------------------------------------------------------------

def query(fixture_run, capsys, *terms):
    code = main(["query", "--out", str(fixture_run[0]), *terms])
    captured = capsys.readouterr()
    return code, list(csv.DictReader(io.StringIO(captured.out))), captured.err


def test_query_citing_venue_top5(fixture_run, oracle, capsys):
    code, rows, _ = query(fixture_run, capsys, "direction=cit", "venue=Organised Sound", "top=5")
    assert code == 0
    assert [(r["work_id"], int(r["count"])) for r in rows] == oracle.query_cit_venue("Organised Sound", 5)
    assert len(rows) == 5


def test_query_quoted_single_argument(fixture_run, capsys):
    code, rows, _ = query(fixture_run, capsys, 'direction=cit venue="Organised Sound" top=5')
    assert code == 0 and len(rows) == 5


def test_query_empty_year_window(fixture_run, capsys):
    code, rows, _ = query(fixture_run, capsys, "year=1800..1801")
    assert code == 0 and rows == []


def test_query_year_window_counts(fixture_run, oracle, capsys):
    code, rows, _ = query(fixture_run, capsys, "year=2005..2006", "in_corpus=true")
    assert code == 0
    expected = {}
    for y, w in oracle.links("references"):
        if 2005 <= y <= 2006 and w["paperId"] in oracle.papers:
            expected[w["paperId"]] = expected.get(w["paperId"], 0) + 1
    assert {r["work_id"]: int(r["count"]) for r in rows} == expected


def test_query_authors_table(fixture_run, oracle, capsys):
    code, rows, _ = query(fixture_run, capsys, "table=authors", "direction=ref", "top=3")
    assert code == 0
    assert [int(r["count"]) for r in rows] == [c for _, c in oracle.author_top("references", 3)]


def test_query_field_filter(fixture_run, oracle, capsys):
    code, rows, _ = query(fixture_run, capsys, "field=Art", "sort=-count")
    assert code == 0
    art = {wid for wid, w in oracle.unique_works("references").items() if "Art" in (w["fieldsOfStudy"] or [])}
    assert {r["work_id"] for r in rows} == art
    counts = [int(r["count"]) for r in rows]
    assert counts == sorted(counts)


def test_query_unknown_key_lists_valid_keys(fixture_run, capsys):
    code, _, err = query(fixture_run, capsys, "colour=blue")
    assert code == 1
    assert "valid keys" in err and "venue" in err


def test_query_malformed_term(fixture_run, capsys):
    code, _, err = query(fixture_run, capsys, "top=many")
    assert code == 1 and "top" in err


def test_query_before_fetch_is_data_error(tmp_path, capsys):
    assert main(["query", "--out", str(tmp_path), "top=1"]) == 2
    assert "proclens fetch" in capsys.readouterr().err
