from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracle import bib_years, count_bib_entries

from proclens.corpus import (
    BibtexParseError,
    ascii_fold,
    extract_last_name,
    normalize_text,
    parse_bibliography,
    read_bibliography,
    read_corpus_csv,
    serialize_bibliography,
    write_corpus_csv,
)


def test_minimal_entry():
    entries = parse_bibliography("@inproceedings{a1, title={X}, author={A B}, year={2005}}")
    assert len(entries) == 1
    e = entries[0]
    assert (e.entry_key, e.title, e.year, len(e.authors)) == ("a1", "X", 2005, 1)
    assert not e.malformed


def test_empty_text():
    assert parse_bibliography("") == []


def test_fixture_entry_count_matches_line_scanner(fixture_dir):
    path = fixture_dir / "fixture30.bib"
    entries = read_bibliography(path)
    assert len(entries) == count_bib_entries(path) == 30
    assert {e.entry_key: e.year for e in entries} == bib_years(path)
    assert {e.year for e in entries} == set(range(2001, 2011))


@pytest.mark.parametrize("raw, expected", [
    ("{Tangible} Music", "Tangible Music"),
    ("Fa\\c{c}ade", "Façade"),
    ("  a \t b  ", "a b"),
    ('M{\\"u}ller', "Müller"),
    ("S{\\o}rensen", "Sørensen"),
    ("Garc{\\'\\i}a", "García"),
    ("Feedback \\& Latency", "Feedback & Latency"),
    ("\\emph{Deep} nets", "Deep nets"),
])
def test_normalize_text(raw, expected):
    assert normalize_text(raw) == expected


def test_unknown_escape_passes_through():
    assert normalize_text("\\frobnicate x") == "\\frobnicate x"


@pytest.mark.parametrize("full, last, ascii_last", [
    ("Sørensen, Anna", "Sørensen", "sorensen"),
    ("Jean-Luc du Pré", "du Pré", "du pre"),
    ("Cher", "Cher", "cher"),
    ("Ludwig van Beek", "van Beek", "van beek"),
    ("O'Neil, Cathy", "O'Neil", "o'neil"),
    ("Anne-Marie Smith-Jones", "Smith-Jones", "smith-jones"),
])
def test_extract_last_name(full, last, ascii_last):
    name = extract_last_name(full)
    assert (name.last, name.ascii_last) == (last, ascii_last)


def test_extract_last_name_empty():
    with pytest.raises(ValueError):
        extract_last_name("   ")


def test_braced_corporate_author_is_one_name():
    e = parse_bibliography("@misc{k, title={T}, author={{Ircam Team} and Doe, Jane}, year={2010}}")[0]
    assert [a.last for a in e.authors] == ["Ircam Team", "Doe"]


def test_unbalanced_braces_report_byte_offset():
    text = "@misc{ok, title={T}, author={A}, year={2001}}\n@misc{bad, title={Ünbalanced, year={2002}\n"
    with pytest.raises(BibtexParseError) as info:
        parse_bibliography(text)
    # points at the brace that never closes
    assert info.value.offset == text.encode("utf-8").index(b"{\xc3\x9cnbalanced")


def test_duplicate_keys_name_both_offsets():
    text = "@misc{k, title={A}, author={X}, year={2001}}\n@misc{k, title={B}, author={Y}, year={2002}}"
    with pytest.raises(ValueError, match=r"offsets 0 and 45"):
        parse_bibliography(text)


def test_malformed_entries_are_kept_and_flagged():
    text = ("@misc{noauth, title={T}, year={2001}}\n"
            "@misc{future, title={T}, author={A}, year={2999}}\n"
            "@misc{noyear, title={T}, author={A}}")
    entries = parse_bibliography(text)
    assert [e.entry_key for e in entries] == ["noauth", "future", "noyear"]
    assert all(e.malformed for e in entries)
    assert "missing authors" in entries[0].problems


def test_comment_string_and_preamble_are_skipped():
    text = ("@comment{ignore me}\n@string{foo = {bar}}\n@preamble{\"x\"}\n"
            "@article{a, title = \"Quoted {Title}\", author = {Doe, J.}, year = 2003}")
    entries = parse_bibliography(text)
    assert [(e.entry_key, e.title, e.year, e.entry_type) for e in entries] == [("a", "Quoted Title", 2003, "article")]


def test_entry_types_are_not_filtered():
    text = "@book{b, title={B}, author={A}, year={2001}}\n@phdthesis{t, title={T}, author={A}, year={2002}}"
    assert [e.entry_type for e in parse_bibliography(text)] == ["book", "phdthesis"]


def test_fixture_round_trip_is_fixed_point(fixture_dir):
    first = read_bibliography(fixture_dir / "fixture30.bib")
    second = parse_bibliography(serialize_bibliography(first))
    third = parse_bibliography(serialize_bibliography(second))
    assert second == first
    assert third == second


def test_corpus_csv_round_trip(tmp_path, fixture_dir):
    entries = read_bibliography(fixture_dir / "fixture30.bib")
    write_corpus_csv(entries, tmp_path / "corpus.csv")
    back = read_corpus_csv(tmp_path / "corpus.csv")
    assert [(e.entry_key, e.title, e.year, e.authors) for e in back] == \
           [(e.entry_key, e.title, e.year, e.authors) for e in entries]


latexish = st.text(alphabet=st.sampled_from(list("abcXYZ {}\\'\"`^~c&%$_ \t\nøüé")), max_size=40)


@settings(max_examples=300, deadline=None)
@given(latexish)
def test_normalize_idempotent(s):
    once = normalize_text(s)
    assert normalize_text(once) == once


@settings(max_examples=200, deadline=None)
@given(st.from_regex(r"[A-Za-z]{1,10}( [A-Za-z]{1,10}){0,2}", fullmatch=True))
def test_ascii_names_only_change_case(name):
    out = extract_last_name(name)
    assert out.ascii_last == out.last.lower()
    assert ascii_fold(out.last) == out.last


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=30))
def test_ascii_last_alphabet(name):
    try:
        out = extract_last_name(name)
    except ValueError:
        return
    assert all(c.isascii() and (c.isalpha() or c in "-' ") for c in out.ascii_last)
