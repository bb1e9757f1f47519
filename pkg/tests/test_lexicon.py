"""Entity lexicon: loading, normalization, matching semantics."""

import logging

import pytest
from hypothesis import given, strategies as st

from radmask.lexicon import (
    EmptyLexicon,
    EntityLexicon,
    EntitySpan,
    ParseError,
    derive_word_level,
    find_entities,
    fold_case,
    load_lexicon,
    save_lexicon,
)


def test_fold_case_preserves_length():
    for s in ("ABC def", "Straße", "İstanbul", "MiXeD 123"):
        assert len(fold_case(s)) == len(s)
    assert fold_case("ABC") == "abc"


def test_entries_normalized_and_ordered():
    lex = EntityLexicon(
        [("C1", "  Pulmonary   Edema "), ("C2", "pleural effusion")], "phrase"
    )
    assert lex.surfaces == ("pulmonary edema", "pleural effusion")
    assert lex.concept_ids == ("C1", "C2")
    assert list(lex.entries()) == [
        ("C1", "pulmonary edema"),
        ("C2", "pleural effusion"),
    ]


def test_duplicate_surface_keeps_first(caplog):
    with caplog.at_level(logging.WARNING):
        lex = EntityLexicon([("C1", "edema"), ("C2", "EDEMA")], "word")
    assert lex.concept_ids == ("C1",)
    assert "duplicate" in caplog.text


def test_word_level_rejects_multiword_rows_individually(caplog):
    with caplog.at_level(logging.WARNING):
        lex = EntityLexicon([("C1", "pleural effusion"), ("C2", "edema")], "word")
    assert lex.surfaces == ("edema",)
    assert "multi-word" in caplog.text


def test_all_rows_unusable_raises():
    with pytest.raises(EmptyLexicon):
        EntityLexicon([("C1", "pleural effusion")], "word")
    with pytest.raises(EmptyLexicon):
        EntityLexicon([], "phrase")


def test_bad_level_and_empty_surface():
    with pytest.raises(ParseError):
        EntityLexicon([("C1", "edema")], "sentence")
    with pytest.raises(ParseError):
        EntityLexicon([("C1", "   ")], "phrase")


# ------------------------------------------------------------- matching


def test_leftmost_longest_single_span(phrase_lexicon):
    text = "mild pulmonary vascular congestion persists"
    spans = find_entities(phrase_lexicon, text)
    assert spans == [
        EntitySpan(5, 34, "pulmonary vascular congestion", "C0034063")
    ]


def test_match_is_case_insensitive_with_original_offsets(phrase_lexicon):
    text = "PLEURAL EFFUSION and Pneumothorax."
    spans = find_entities(phrase_lexicon, text)
    assert [(s.start, s.end, s.surface) for s in spans] == [
        (0, 16, "pleural effusion"),
        (21, 33, "pneumothorax"),
    ]
    # offsets index the original, unfolded text
    assert text[0:16] == "PLEURAL EFFUSION"


def test_substring_inside_word_is_rejected(phrase_lexicon):
    lex = EntityLexicon([("C1", "rib")], "word")
    assert find_entities(lex, "describe the ribs") == []
    assert [s.start for s in find_entities(lex, "left rib fracture")] == [5]


def test_boundary_at_punctuation_is_accepted(phrase_lexicon):
    spans = find_entities(phrase_lexicon, "no pneumothorax, no pneumonia.")
    assert [(s.start, s.end) for s in spans] == [(3, 15), (20, 29)]


def test_longer_match_wins_at_same_start():
    lex = EntityLexicon([("C1", "lung"), ("C2", "lung volumes")], "phrase")
    spans = find_entities(lex, "low lung volumes noted")
    assert [(s.surface, s.concept_id) for s in spans] == [("lung volumes", "C2")]


def test_earlier_match_wins_on_crossing_overlap():
    lex = EntityLexicon([("C1", "right heart"), ("C2", "heart border")], "phrase")
    spans = find_entities(lex, "the right heart border")
    assert [s.surface for s in spans] == ["right heart"]


def test_adjacent_spans_do_not_merge():
    lex = EntityLexicon([("C1", "mild"), ("C2", "edema")], "word")
    spans = find_entities(lex, "mild edema")
    assert [(s.start, s.end) for s in spans] == [(0, 4), (5, 10)]


def test_no_matches_in_empty_text(phrase_lexicon):
    assert find_entities(phrase_lexicon, "") == []


@given(
    st.text(alphabet="ab .,XY", max_size=80),
)
def test_spans_are_in_bounds_ordered_disjoint(text):
    lex = EntityLexicon(
        [("C1", "ab"), ("C2", "a b"), ("C3", "b"), ("C4", "ab ab")], "phrase"
    )
    spans = find_entities(lex, text)
    prev_end = 0
    for s in spans:
        assert 0 <= s.start < s.end <= len(text)
        assert s.start >= prev_end
        prev_end = s.end
        assert fold_case(text[s.start : s.end]) == s.surface


# ----------------------------------------------------------- derivation


def test_derive_word_level_first_seen_order(phrase_lexicon):
    words = derive_word_level(phrase_lexicon)
    assert words.level == "word"
    assert words.surfaces == (
        "pulmonary",
        "vascular",
        "congestion",
        "pneumonia",
        "pneumothorax",
        "pleural",
        "effusion",
        "low",
        "lung",
        "volumes",
    )
    # each word inherits the first phrase's concept id
    by_surface = {s: c for c, s in words.entries()}
    assert by_surface["vascular"] == "C0034063"


def test_derive_word_level_needs_phrase_input(word_lexicon):
    with pytest.raises(ParseError):
        derive_word_level(word_lexicon)


# ------------------------------------------------------------- file io


def test_load_save_roundtrip(tmp_path):
    src = tmp_path / "terms.tsv"
    src.write_text(
        "# concept\tsurface\n"
        "\n"
        "C1\tPleural Effusion\n"
        "C2\tpneumothorax\n",
        encoding="utf-8",
    )
    lex = load_lexicon(src, "phrase")
    assert lex.surfaces == ("pleural effusion", "pneumothorax")

    out = tmp_path / "copy.tsv"
    save_lexicon(lex, out)
    again = load_lexicon(out, "phrase")
    assert list(again.entries()) == list(lex.entries())


def test_load_rejects_malformed_rows(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("C1 no tab here\n", encoding="utf-8")
    with pytest.raises(ParseError):
        load_lexicon(bad, "phrase")
    bad.write_text("\tmissing concept\n", encoding="utf-8")
    with pytest.raises(ParseError):
        load_lexicon(bad, "phrase")


def test_cache_sidecar_roundtrip(tmp_path):
    src = tmp_path / "terms.tsv"
    src.write_text("C1\tpleural effusion\nC2\tedema\n", encoding="utf-8")
    first = load_lexicon(src, "phrase", use_cache=True)
    sidecar = tmp_path / "terms.tsv.cache.json"
    assert sidecar.exists()
    second = load_lexicon(src, "phrase", use_cache=True)
    assert list(second.entries()) == list(first.entries())

    # content change invalidates the cache key
    src.write_text("C9\tnew surface\n", encoding="utf-8")
    third = load_lexicon(src, "phrase", use_cache=True)
    assert third.surfaces == ("new surface",)


def test_cache_is_level_specific(tmp_path):
    src = tmp_path / "terms.tsv"
    src.write_text("C1\tedema\n", encoding="utf-8")
    load_lexicon(src, "phrase", use_cache=True)
    as_word = load_lexicon(src, "word", use_cache=True)
    assert as_word.level == "word"
