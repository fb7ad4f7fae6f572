"""Response parsing cascade and hallucination canonicalization."""

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from annotriage.parsing import (
    DEFAULT_STYLE_LEXICON,
    AnnotationRecord,
    ParsedLabel,
    canonicalize_hallucination,
    normalize,
    parse_response,
)

ORDER = ("formed_on", "acquired_on", "no_other")
TEXTS = (
    "Mississippi Power Company is/was formed on December 23, 1924",
    "Mississippi Power Company is/was acquired on December 23, 1924",
    "no/other relation between Mississippi Power Company and December 23, 1924",
)


class TestCascade:
    def test_blank_from_empty(self):
        assert parse_response("", ORDER, TEXTS) == ParsedLabel.blank()

    def test_blank_from_whitespace(self):
        assert parse_response("   \n\t ", ORDER, TEXTS) == ParsedLabel.blank()

    def test_direct_index(self):
        assert parse_response("2", ORDER, TEXTS) == ParsedLabel.from_label("acquired_on")

    def test_quoted_index(self):
        assert parse_response('"2"', ORDER, TEXTS) == ParsedLabel.from_label("acquired_on")

    def test_index_with_option_text(self):
        raw = "1. Mississippi Power Company is/was formed on December 23, 1924"
        assert parse_response(raw, ORDER, TEXTS) == ParsedLabel.from_label("formed_on")

    def test_option_text_exact(self):
        assert parse_response(TEXTS[0], ORDER, TEXTS) == ParsedLabel.from_label("formed_on")

    def test_option_text_case_and_punctuation_folded(self):
        raw = "MISSISSIPPI power company IS/WAS FORMED ON December 23, 1924."
        assert parse_response(raw, ORDER, TEXTS) == ParsedLabel.from_label("formed_on")

    def test_canonical_id_match(self):
        assert parse_response("no_other", ORDER, TEXTS) == ParsedLabel.from_label("no_other")

    def test_canonical_id_with_spaces(self):
        assert parse_response("formed on", ORDER, TEXTS) == ParsedLabel.from_label("formed_on")

    def test_free_text_becomes_hallucination(self):
        options = ("no_other", "subsidiary_of", "shares_of")
        texts = (
            "no/other relation between Hawaii Gas and Macquarie Group Limited",
            "Hawaii Gas is a subsidiary of Macquarie Group Limited",
            "Hawaii Gas holds shares of Macquarie Group Limited",
        )
        parsed = parse_response(
            "Hawaii Gas has an agreement with Macquarie Group Limited", options, texts
        )
        assert parsed.kind == "hallucination"
        assert parsed.style == "agreement_with"
        assert "agreement with" in parsed.text

    def test_out_of_range_number_falls_through(self):
        parsed = parse_response("7", ORDER, TEXTS)
        assert parsed.kind == "hallucination"

    def test_number_priority_over_text(self):
        # A digit answer wins even when option text follows a different option.
        raw = "2 (that is, Mississippi Power Company is/was formed on December 23, 1924)"
        assert parse_response(raw, ORDER, TEXTS) == ParsedLabel.from_label("acquired_on")

    def test_misaligned_inputs_rejected(self):
        with pytest.raises(ValueError):
            parse_response("1", ORDER, TEXTS[:2])


class TestRoundTrip:
    @pytest.mark.parametrize("permutation", list(itertools.permutations(range(3))))
    def test_every_option_text_parses_back(self, permutation):
        order = tuple(ORDER[i] for i in permutation)
        texts = tuple(TEXTS[i] for i in permutation)
        for label, text in zip(order, texts):
            assert parse_response(text, order, texts) == ParsedLabel.from_label(label)

    @pytest.mark.parametrize(
        "decorate",
        [
            lambda t: f"  {t}  ",
            lambda t: f"{t}.",
            lambda t: f"{t}...",
            lambda t: f"Answer: {t}",
            lambda t: f"answer : {t}.",
            lambda t: f"ANSWER:  {t}\n",
            lambda t: f"Final answer: {t}",
        ],
    )
    def test_decorations_do_not_change_outcome(self, decorate):
        for label, text in zip(ORDER, TEXTS):
            assert parse_response(decorate(text), ORDER, TEXTS) == ParsedLabel.from_label(label)
        assert parse_response(decorate("2"), ORDER, TEXTS) == ParsedLabel.from_label("acquired_on")

    @given(
        st.sampled_from(list(range(3))),
        st.sampled_from(["", " ", "\n"]),
        st.sampled_from(["", ".", "!", ":"]),
    )
    @settings(max_examples=60)
    def test_fuzzed_valid_options_never_hallucinate(self, index, pad, punct):
        raw = f"{pad}{TEXTS[index]}{punct}{pad}"
        parsed = parse_response(raw, ORDER, TEXTS)
        assert parsed == ParsedLabel.from_label(ORDER[index])


class TestCanonicalizeHallucination:
    def test_licensing_agreements(self):
        assert canonicalize_hallucination("entered into licensing agreements with") == "agreement_with"

    def test_unknown_text(self):
        assert canonicalize_hallucination("xyzzy") is None

    def test_lexicon_idempotence(self):
        for style, phrases in DEFAULT_STYLE_LEXICON.items():
            for phrase in phrases:
                assert canonicalize_hallucination(phrase) == style, phrase

    def test_custom_lexicon(self):
        lexicon = {"partner_of": ("partnered with",)}
        assert canonicalize_hallucination("They partnered with us", lexicon) == "partner_of"
        assert canonicalize_hallucination("agreement with", lexicon) is None


class TestNormalize:
    def test_case_whitespace_punctuation(self):
        assert normalize("  Formed   ON. ") == "formed on"

    def test_unicode_fold(self):
        assert normalize("Café AGREEMENT") == "café agreement"


class TestAnnotationRecord:
    def test_round_trip(self):
        record = AnnotationRecord(
            instance_id="i1",
            backend="mock",
            variant="simple",
            temperature=0.2,
            run_index=1,
            raw="2",
            parsed=ParsedLabel.from_label("acquired_on"),
            option_order=ORDER,
            input_tokens=10,
            output_tokens=1,
            input_chars=50,
            output_chars=1,
            latency=0.9,
        )
        assert AnnotationRecord.from_dict(record.to_dict()) == record

    def test_annotator_id(self):
        record = AnnotationRecord(
            instance_id="i1",
            backend="mock",
            variant="simple",
            temperature=0.2,
            run_index=2,
            raw="",
            parsed=ParsedLabel.blank(),
            option_order=ORDER,
        )
        assert record.annotator == "mock/simple/t0.2/r2"

    def test_parsed_rederivable_from_raw(self):
        raw = TEXTS[2]
        record = AnnotationRecord(
            instance_id="i1",
            backend="mock",
            variant="simple",
            temperature=0.2,
            run_index=1,
            raw=raw,
            parsed=parse_response(raw, ORDER, TEXTS),
            option_order=ORDER,
        )
        assert parse_response(record.raw, record.option_order, TEXTS) == record.parsed
