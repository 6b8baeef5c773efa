from __future__ import annotations

import json

import pytest

from proclens.corpus import CorpusEntry, extract_last_name, read_bibliography
from proclens.metadata import FixtureTransport, MetadataClient
from proclens.records import Author, PaperRecord
from proclens.resolver import (
    EXCLUDED,
    FAILED,
    NEEDS_MANUAL,
    RESOLVED,
    OverrideTable,
    build_query_ladder,
    load_overrides,
    read_resolution,
    resolve,
    resolve_corpus,
    summarize,
    validate_candidate,
    write_resolution,
)


def entry(title="T", authors=("A", "B"), year=2005, key="k") -> CorpusEntry:
    return CorpusEntry(key, title, title, [extract_last_name(a) for a in authors], year)


def fixture_client(fixture_dir, script=None) -> MetadataClient:
    return MetadataClient(FixtureTransport.from_directory(fixture_dir, script=script), backoff=0.0,
                          sleep=lambda s: None)


@pytest.fixture(scope="module")
def fixture_entries(fixture_dir):
    return {e.entry_key: e for e in read_bibliography(fixture_dir / "fixture30.bib")}


def test_full_ladder_has_twelve_rungs():
    ladder = build_query_ladder(entry(), "CONF")
    assert len(ladder) == 12
    assert ladder.rungs[0] == "T A B 2005 CONF"
    assert ladder.positions == list(range(1, 13))


def test_missing_year_skips_year_rungs():
    ladder = build_query_ladder(entry(year=None), "CONF")
    assert ladder.positions == [3, 5, 8, 9, 10, 12]


def test_missing_authors_skip_author_rungs():
    ladder = build_query_ladder(entry(authors=()), "CONF")
    assert ladder.positions == [6, 7, 8, 9, 11, 12]


def test_folded_duplicates_are_removed():
    # a lowercase ASCII title without punctuation folds to itself: rung 12 repeats
    # rung 9 and rung 11 repeats rung 7, so ten distinct rungs remain
    ladder = build_query_ladder(entry(title="tangible music"), "CONF")
    assert len(ladder) == 10
    assert 11 not in ladder.positions and 12 not in ladder.positions
    assert len(set(ladder.rungs)) == len(ladder.rungs)


def test_ladder_folds_title_and_first_author():
    ladder = build_query_ladder(entry(title="Müsic: a Tést!", authors=("Sørensen, Anna",)), "")
    assert ladder.rungs[ladder.positions.index(10)] == "music a test sorensen"


def test_empty_title_is_an_error():
    with pytest.raises(ValueError):
        build_query_ladder(entry(title=""), "CONF")


@pytest.mark.parametrize("entry_authors, candidate, ok", [
    (("Doe, J", "Li, X"), ["Xiu Li", "Jane Doe"], True),
    (("Doe, J",), ["Jane Doe", "Sam Smith"], False),
    (("Sorensen, A",), ["Anna Sørensen"], True),
    (("Doe, J", "Doe, K"), ["Jane Doe", "Kim Lee"], False),
    (("du Pré, J",), ["Jacqueline du Pré"], True),
])
def test_validate_candidate(entry_authors, candidate, ok):
    rec = PaperRecord("X", authors=[Author(n, None) for n in candidate])
    assert validate_candidate(entry(authors=entry_authors), rec) is ok


def test_f01_resolves_at_first_rung(fixture_dir, fixture_entries):
    out = resolve(fixture_entries["F01"], fixture_client(fixture_dir), OverrideTable(), "VENUE")
    assert (out.status, out.paper_id, out.rung_used) == (RESOLVED, "P001", 1)
    index = json.loads((fixture_dir / "search_index.json").read_text(encoding="utf-8"))
    rung1 = build_query_ladder(fixture_entries["F01"], "VENUE").rungs[0]
    assert index[rung1] == ["P001"]


def test_f04_resolves_at_rung_six(fixture_dir, fixture_entries):
    client = fixture_client(fixture_dir)
    out = resolve(fixture_entries["F04"], client, OverrideTable(), "VENUE")
    assert (out.status, out.paper_id, out.rung_used) == (RESOLVED, "P004", 6)
    assert client.transport.requests[-1][1]["query"] == "Alpha Beta 2004 VENUE"


def test_wrong_author_decoy_is_rejected(fixture_dir, fixture_entries):
    out = resolve(fixture_entries["F08"], fixture_client(fixture_dir), OverrideTable(), "VENUE")
    assert (out.paper_id, out.rung_used) == ("P008", 2)


def test_only_first_hit_is_considered(fixture_dir, fixture_entries):
    # rung 1 returns [decoy, correct]; the correct record is only accepted later at rung 9
    out = resolve(fixture_entries["F09"], fixture_client(fixture_dir), OverrideTable(), "VENUE")
    assert (out.paper_id, out.rung_used) == ("P009", 9)


def test_folded_rung_resolves_diacritic_author(fixture_dir, fixture_entries):
    out = resolve(fixture_entries["F18"], fixture_client(fixture_dir), OverrideTable(), "VENUE")
    assert (out.paper_id, out.rung_used) == ("P018", 10)


def test_f13_decoy_on_all_rungs_needs_manual(fixture_dir, fixture_entries):
    client = fixture_client(fixture_dir)
    out = resolve(fixture_entries["F13"], client, OverrideTable(), "VENUE")
    assert out.status == NEEDS_MANUAL and out.paper_id == ""
    ladder = build_query_ladder(fixture_entries["F13"], "VENUE")
    assert len(client.transport.requests) == len(ladder)


def test_exclusion_short_circuits_without_network(fixture_dir, fixture_entries):
    client = fixture_client(fixture_dir)
    out = resolve(fixture_entries["F05"], client, OverrideTable(exclusions={"F05": "keynote"}), "VENUE")
    assert (out.status, out.note) == (EXCLUDED, "keynote")
    assert client.transport.requests == []


def test_override_short_circuits(fixture_dir, fixture_entries):
    client = fixture_client(fixture_dir)
    out = resolve(fixture_entries["F22"], client, OverrideTable({"F22": "P022"}), "VENUE")
    assert (out.status, out.paper_id, out.rung_used) == (RESOLVED, "P022", None)
    assert client.transport.requests == []


def test_override_table_must_be_disjoint():
    with pytest.raises(ValueError):
        OverrideTable({"a": "1"}, {"a": "why"})


def test_fixture_corpus_without_overrides(fixture_dir, fixture_entries):
    outcomes, summary = resolve_corpus(list(fixture_entries.values()), fixture_client(fixture_dir),
                                       OverrideTable(), "VENUE")
    manual = sorted(o.entry_key for o in outcomes if o.status == NEEDS_MANUAL)
    assert manual == ["F13", "F22"]
    assert summary.counts[RESOLVED] == 28
    assert summary.coverage == pytest.approx(28 / 30)


def test_fixture_corpus_with_overrides_is_complete(fixture_dir, fixture_entries):
    overrides = load_overrides(fixture_dir / "overrides.csv", fixture_dir / "exclusions.csv")
    outcomes, summary = resolve_corpus(list(fixture_entries.values()), fixture_client(fixture_dir),
                                       overrides, "VENUE")
    assert summary.counts[RESOLVED] == 30 and summary.coverage == 1.0
    assert [o.paper_id for o in outcomes] == [f"P{i:03d}" for i in range(1, 31)]
    assert not summary.collisions


def test_resolved_outcomes_pass_post_hoc_validation(fixture_dir, fixture_entries):
    client = fixture_client(fixture_dir)
    outcomes, _ = resolve_corpus(list(fixture_entries.values()), client, OverrideTable(), "VENUE")
    for o in outcomes:
        if o.status == RESOLVED:
            assert validate_candidate(fixture_entries[o.entry_key], client.fetch_paper(o.paper_id))


def test_coverage_arithmetic():
    outcomes = ([type("O", (), {"status": RESOLVED})()] * (2069 + 26)
                + [type("O", (), {"status": EXCLUDED})()] * 11
                + [type("O", (), {"status": NEEDS_MANUAL})()] * 4)
    s = summarize(outcomes)
    assert s.total == 2110
    assert s.coverage == pytest.approx((2069 + 26) / (2110 - 11))
    assert round(s.coverage, 3) == 0.998


def test_all_excluded_coverage_is_zero_with_note():
    e = entry()
    outcomes, s = resolve_corpus([e], None, OverrideTable(exclusions={"k": "x"}))
    assert s.coverage == 0.0 and "undefined" in s.note


def test_collisions_are_reported(fixture_dir, fixture_entries):
    overrides = OverrideTable({"F13": "P001", "F22": "P022"})
    outcomes, s = resolve_corpus(list(fixture_entries.values()), fixture_client(fixture_dir), overrides, "VENUE")
    assert s.collisions == {"P001": ["F01", "F13"]}
    assert "collision with F13" in outcomes[0].note


def test_transport_failure_is_distinct_and_batch_continues(fixture_dir, fixture_entries):
    client = MetadataClient(FixtureTransport.from_directory(fixture_dir, script=[500] * 4),
                            max_retries=3, backoff=0.0, sleep=lambda s: None)
    entries = [fixture_entries["F01"], fixture_entries["F02"]]
    outcomes, s = resolve_corpus(entries, client, OverrideTable(), "VENUE")
    assert [o.status for o in outcomes] == [FAILED, RESOLVED]
    assert s.counts[FAILED] == 1


def test_parallel_resolution_matches_serial(fixture_dir, fixture_entries):
    entries = list(fixture_entries.values())
    serial, _ = resolve_corpus(entries, fixture_client(fixture_dir), OverrideTable(), "VENUE")
    parallel, _ = resolve_corpus(entries, fixture_client(fixture_dir), OverrideTable(), "VENUE", workers=4)
    assert serial == parallel


def test_resolution_file_round_trip(tmp_path, fixture_dir, fixture_entries):
    outcomes, _ = resolve_corpus(list(fixture_entries.values()), fixture_client(fixture_dir),
                                 OverrideTable(), "VENUE")
    write_resolution(outcomes, tmp_path / "r.csv")
    assert read_resolution(tmp_path / "r.csv") == outcomes


def test_override_file_missing_column(tmp_path):
    p = tmp_path / "overrides.csv"
    p.write_text("entry,paper\nF1,P1\n", encoding="utf-8")
    with pytest.raises(ValueError, match="paper_id"):
        load_overrides(p, None)
