import json
import random
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as hs

from promptsteal.prompts import (
    ModifierCategory,
    ModifierVocabulary,
    ParsedPrompt,
    PromptParseError,
    Taxonomy,
    VocabEntry,
    build_vocabulary,
    categorize_modifier,
    compose_prompt,
    default_taxonomy,
    normalize_modifier,
    parse_prompt,
)

FIGURE1_PROMPT = (
    "cozy enchanted treehouse in ancient forest, diffuse lighting, fantasy, intricate, "
    "elegant, highly detailed, lifelike, photorealistic, digital painting, artstation, "
    "illustration, concept art, smooth, sharp focus, art by John Collier and Albert "
    "Aublet and Krenz Cushart and Artem Demura and Alphonse Mucha"
)
FIGURE1_SUBJECT = "cozy enchanted treehouse in ancient forest"
FIGURE1_MODIFIERS = (
    "diffuse lighting",
    "fantasy",
    "intricate",
    "elegant",
    "highly detailed",
    "lifelike",
    "photorealistic",
    "digital painting",
    "artstation",
    "illustration",
    "concept art",
    "smooth",
    "sharp focus",
    "john collier and albert aublet and krenz cushart and artem demura and alphonse mucha",
)


class TestNormalizeModifier:
    def test_digit_letter_rejoin(self):
        assert normalize_modifier("8 k") == "8k"
        assert normalize_modifier("3 d") == "3d"
        assert normalize_modifier("4 k") == "4k"

    def test_identity_on_normalized(self):
        assert normalize_modifier("highly detailed") == "highly detailed"

    def test_style_prefix_and_case(self):
        assert normalize_modifier("Art by Greg Rutkowski") == "greg rutkowski"
        assert normalize_modifier("trending on ArtStation") == "artstation"
        assert normalize_modifier("in the style of monet") == "monet"
        assert normalize_modifier("in style of monet") == "monet"
        assert normalize_modifier("inspired by wlop") == "wlop"

    def test_prefix_only_at_head(self):
        assert normalize_modifier("landscape art by monet") == "landscape art by monet"

    def test_stacked_prefixes_reach_fixpoint(self):
        assert normalize_modifier("art by in the style of monet") == "monet"

    def test_whitespace_collapse(self):
        assert normalize_modifier("  sharp   focus ") == "sharp focus"

    def test_empty_results(self):
        assert normalize_modifier("") == ""
        assert normalize_modifier("   ") == ""
        assert normalize_modifier("art by") == ""

    def test_rejoin_needs_lone_letter(self):
        assert normalize_modifier("8 kd") == "8 kd"
        assert normalize_modifier("8 km") == "8 km"

    @given(hs.text(max_size=60))
    def test_idempotent(self, raw):
        once = normalize_modifier(raw)
        assert normalize_modifier(once) == once

    def test_idempotent_fuzz_10k(self):
        rng = random.Random(12345)
        alphabet = string.ascii_letters + string.digits + " ,-_'"
        words = ["art", "by", "in", "the", "style", "of", "8", "k", "3", "d", "trending", "on"]
        for _ in range(10_000):
            if rng.random() < 0.5:
                raw = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
            else:
                raw = " ".join(rng.choice(words) for _ in range(rng.randint(0, 8)))
            once = normalize_modifier(raw)
            assert normalize_modifier(once) == once


class TestParsePrompt:
    def test_figure1_golden(self):
        parsed = parse_prompt(FIGURE1_PROMPT)
        assert parsed.subject == FIGURE1_SUBJECT
        assert parsed.modifiers == FIGURE1_MODIFIERS
        assert len(parsed.modifiers) == 14

    def test_no_commas(self):
        parsed = parse_prompt("a cat")
        assert parsed.subject == "a cat"
        assert parsed.modifiers == ()

    def test_normalization_applies(self):
        parsed = parse_prompt("x, 3 d, art by bob")
        assert parsed.subject == "x"
        assert parsed.modifiers == ("3d", "bob")

    def test_subject_case_preserved(self):
        assert parse_prompt("A Cat, 8K").subject == "A Cat"
        assert parse_prompt("A Cat, 8K").modifiers == ("8k",)

    def test_duplicates_dropped_keeping_first(self):
        parsed = parse_prompt("x, 8k, 8 k, smooth, SMOOTH")
        assert parsed.modifiers == ("8k", "smooth")

    def test_empty_segments_dropped(self):
        assert parse_prompt("x, , ,8k").modifiers == ("8k",)

    @pytest.mark.parametrize("raw", ["", "   ", "\t\n"])
    def test_empty_prompt_errors(self, raw):
        with pytest.raises(PromptParseError):
            parse_prompt(raw)

    def test_empty_subject_segment_errors(self):
        with pytest.raises(PromptParseError):
            parse_prompt(", 8k")

    def test_modifiers_comma_free_and_distinct(self):
        parsed = parse_prompt("x, a, b, a, c")
        assert len(set(parsed.modifiers)) == len(parsed.modifiers)
        assert all("," not in m for m in parsed.modifiers)


class TestComposePrompt:
    def test_subject_only(self):
        assert compose_prompt(ParsedPrompt("a cat")) == "a cat"

    def test_single_modifier(self):
        assert compose_prompt(ParsedPrompt("a cat", ("8k",))) == "a cat, 8k"

    def test_figure1_roundtrip(self):
        # Hand-applied normalization of the golden prompt: the style-evocation
        # prefix is gone and modifiers are lowercase.
        parsed = parse_prompt(FIGURE1_PROMPT)
        composed = compose_prompt(parsed)
        assert composed == FIGURE1_SUBJECT + ", " + ", ".join(FIGURE1_MODIFIERS)
        assert "art by" not in composed

    def test_roundtrip_on_parse_image(self):
        raws = [
            "a cat, 8 k, art by bob, smooth",
            "Wolf   Portrait, Trending on artstation, 3 d",
            "x",
            FIGURE1_PROMPT,
        ]
        for raw in raws:
            p = parse_prompt(raw)
            assert parse_prompt(compose_prompt(p)) == p

    @given(
        hs.text(
            alphabet=string.ascii_letters + string.digits + " .'-",
            min_size=1,
            max_size=40,
        ).filter(lambda s: s.strip()),
        hs.lists(
            hs.text(alphabet=string.ascii_lowercase + string.digits + " ", min_size=1, max_size=20),
            max_size=8,
        ),
    )
    @settings(max_examples=300)
    def test_roundtrip_property(self, subject, segments):
        raw = ", ".join([subject] + segments)
        try:
            p = parse_prompt(raw)
        except PromptParseError:
            return
        assert parse_prompt(compose_prompt(p)) == p


class TestCategorize:
    def test_paper_table_assignments(self):
        taxonomy = default_taxonomy()
        assert categorize_modifier("greg rutkowski", taxonomy) is ModifierCategory.ARTIST
        assert categorize_modifier("artstation", taxonomy) is ModifierCategory.TRENDING
        assert categorize_modifier("concept art", taxonomy) is ModifierCategory.MEDIUM
        assert categorize_modifier("fantasy art", taxonomy) is ModifierCategory.MOVEMENT

    def test_fallback_is_flavor(self):
        assert categorize_modifier("zzz-unknown-token", default_taxonomy()) is ModifierCategory.FLAVOR

    def test_precedence_on_multi_list_membership(self):
        taxonomy = Taxonomy.from_lists(
            {
                ModifierCategory.ARTIST: ["dual"],
                ModifierCategory.TRENDING: ["dual", "t"],
                ModifierCategory.MEDIUM: ["dual"],
                ModifierCategory.MOVEMENT: ["dual"],
            }
        )
        assert categorize_modifier("dual", taxonomy) is ModifierCategory.ARTIST

    def test_total_and_deterministic(self):
        taxonomy = default_taxonomy()
        for m in ["", "x", "greg rutkowski", "8k", "név unicode"]:
            assert categorize_modifier(m, taxonomy) is categorize_modifier(m, taxonomy)
            assert isinstance(categorize_modifier(m, taxonomy), ModifierCategory)


class TestVocabulary:
    def prompts(self):
        return [
            parse_prompt("s, a, b"),
            parse_prompt("s2, a"),
            parse_prompt("s3, a"),
            parse_prompt("s4, b"),  # a:3, b:2
        ]

    def test_threshold_strictly_exceeded(self):
        vocab = build_vocabulary(self.prompts(), 2, default_taxonomy())
        assert set(vocab.labels) == {"a"}

    def test_counted_once_per_prompt(self):
        # parse_prompt dedupes inside one prompt, so "a" counts once here
        prompts = [parse_prompt("s, a, a"), parse_prompt("s2, a")]
        vocab = build_vocabulary(prompts, 1, default_taxonomy())
        assert vocab.entries["a"].count == 2

    def test_superset_across_thresholds(self):
        lo = build_vocabulary(self.prompts(), 1, default_taxonomy())
        hi = build_vocabulary(self.prompts(), 2, default_taxonomy())
        assert set(hi.labels) <= set(lo.labels)

    def test_empty_prompts_error(self):
        with pytest.raises(ValueError):
            build_vocabulary([], 0, default_taxonomy())

    def test_negative_min_count_error(self):
        with pytest.raises(ValueError):
            build_vocabulary(self.prompts(), -1, default_taxonomy())

    def test_categories_assigned(self):
        prompts = [parse_prompt("s, greg rutkowski, artstation")] * 3
        vocab = build_vocabulary(prompts, 1, default_taxonomy())
        assert vocab.category("greg rutkowski") is ModifierCategory.ARTIST
        assert vocab.category("artstation") is ModifierCategory.TRENDING

    def test_entry_below_threshold_rejected(self):
        with pytest.raises(ValueError):
            ModifierVocabulary({"a": VocabEntry(1, ModifierCategory.FLAVOR)}, min_count=2)

    def test_json_roundtrip(self):
        vocab = build_vocabulary(self.prompts(), 1, default_taxonomy())
        text = vocab.to_json()
        rows = json.loads(text)
        assert rows and set(rows[0]) == {"modifier", "count", "category"}
        back = ModifierVocabulary.from_json(text, min_count=1)
        assert back.labels == vocab.labels
        assert back.entries == vocab.entries

    def test_label_order_is_count_desc(self):
        vocab = build_vocabulary(self.prompts(), 1, default_taxonomy())
        counts = [vocab.entries[m].count for m in vocab.labels]
        assert counts == sorted(counts, reverse=True)


class TestParsedPromptInvariants:
    def test_rejects_empty_subject(self):
        with pytest.raises(PromptParseError):
            ParsedPrompt("")

    def test_rejects_comma_modifier(self):
        with pytest.raises(PromptParseError):
            ParsedPrompt("s", ("a,b",))

    def test_rejects_unnormalized_modifier(self):
        with pytest.raises(PromptParseError):
            ParsedPrompt("s", ("Art by Bob",))

    def test_rejects_duplicates(self):
        with pytest.raises(PromptParseError):
            ParsedPrompt("s", ("8k", "8k"))
