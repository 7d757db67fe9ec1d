"""Prompt decomposition: subject + modifiers, normalization, categories, vocabularies.

A prompt is split on commas; the first segment is the subject, the rest are
modifiers. Modifiers are normalized (case-folded, whitespace-collapsed,
style-evocation prefixes stripped, digit/letter splits rejoined) and carry one
of five categories: trending, artist, medium, movement, flavor.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class PromptParseError(ValueError):
    pass


# Style-evocation phrases stripped from the head of a modifier segment.
# Checked longest-first so "in the style of" wins over "in style of".
STYLE_PREFIXES = (
    "in the style of",
    "inspired by",
    "in style of",
    "trending on",
    "art by",
)
_PREFIXES_BY_LENGTH = tuple(sorted(STYLE_PREFIXES, key=len, reverse=True))

# "8 k" -> "8k", "3 d" -> "3d": a standalone digit run followed by a lone k/d.
_DIGIT_LETTER_SPLIT = re.compile(r"(?<!\S)(\d+) ([kd])(?!\S)")


def normalize_modifier(raw: str) -> str:
    """Canonical modifier text; returns "" when nothing is left (caller drops it)."""
    text = " ".join(raw.lower().split())
    stripped = True
    while stripped:
        stripped = False
        for prefix in _PREFIXES_BY_LENGTH:
            if text == prefix:
                text = ""
                stripped = True
                break
            if text.startswith(prefix + " "):
                text = text[len(prefix) + 1 :]
                stripped = True
                break
    return _DIGIT_LETTER_SPLIT.sub(r"\1\2", text)


@dataclass(frozen=True)
class ParsedPrompt:
    """A prompt decomposed into a subject and an ordered, deduplicated modifier list."""

    subject: str
    modifiers: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.subject or not self.subject.strip():
            raise PromptParseError("subject must be non-empty")
        object.__setattr__(self, "modifiers", tuple(self.modifiers))
        seen = set()
        for m in self.modifiers:
            if "," in m:
                raise PromptParseError(f"modifier contains a comma: {m!r}")
            if normalize_modifier(m) != m:
                raise PromptParseError(f"modifier is not normalized: {m!r}")
            if m in seen:
                raise PromptParseError(f"duplicate modifier: {m!r}")
            seen.add(m)

    @property
    def modifier_set(self) -> frozenset[str]:
        return frozenset(self.modifiers)


def parse_prompt(raw: str) -> ParsedPrompt:
    """Split a raw prompt into subject (first comma segment, case preserved)
    and normalized modifiers (empties and duplicates dropped, order kept)."""
    if not raw or not raw.strip():
        raise PromptParseError("prompt is empty")
    segments = raw.split(",")
    subject = segments[0].strip()
    if not subject:
        raise PromptParseError(f"prompt has an empty subject segment: {raw!r}")
    modifiers: list[str] = []
    seen: set[str] = set()
    for segment in segments[1:]:
        m = normalize_modifier(segment)
        if m and m not in seen:
            seen.add(m)
            modifiers.append(m)
    return ParsedPrompt(subject=subject, modifiers=tuple(modifiers))


def compose_prompt(p: ParsedPrompt) -> str:
    """Inverse of parse_prompt on valid inputs: subject and modifiers joined by ", "."""
    return ", ".join((p.subject,) + p.modifiers)


class ModifierCategory(str, Enum):
    TRENDING = "trending"
    ARTIST = "artist"
    MEDIUM = "medium"
    MOVEMENT = "movement"
    FLAVOR = "flavor"


# Precedence when a modifier appears in several curated lists.
CATEGORY_PRECEDENCE = (
    ModifierCategory.ARTIST,
    ModifierCategory.TRENDING,
    ModifierCategory.MEDIUM,
    ModifierCategory.MOVEMENT,
)

CATEGORIES = tuple(ModifierCategory)


@dataclass(frozen=True)
class Taxonomy:
    """Curated modifier lists for the four non-flavor categories.

    Anything not found in a curated list falls back to flavor.
    """

    artist: frozenset[str] = frozenset()
    trending: frozenset[str] = frozenset()
    medium: frozenset[str] = frozenset()
    movement: frozenset[str] = frozenset()

    def members(self, category: ModifierCategory) -> frozenset[str]:
        if category is ModifierCategory.FLAVOR:
            raise ValueError("flavor has no curated list; it is the fallback category")
        return getattr(self, category.value)

    @classmethod
    def from_lists(cls, lists: Mapping[ModifierCategory | str, Iterable[str]]) -> "Taxonomy":
        kwargs = {}
        for category, values in lists.items():
            category = ModifierCategory(category)
            kwargs[category.value] = frozenset(normalize_modifier(v) for v in values)
        return cls(**kwargs)

    @classmethod
    def from_dir(cls, path: str | Path) -> "Taxonomy":
        """Load one UTF-8 file per non-flavor category, one modifier per line."""
        path = Path(path)
        lists: dict[ModifierCategory, list[str]] = {}
        for category in CATEGORY_PRECEDENCE:
            f = path / f"{category.value}.txt"
            if not f.exists():
                raise FileNotFoundError(f"taxonomy file missing: {f}")
            lists[category] = [line.strip() for line in f.read_text("utf-8").splitlines() if line.strip()]
        return cls.from_lists(lists)


def default_taxonomy() -> Taxonomy:
    """Small taxonomy bundled with the package (well-known real-world modifiers)."""
    return Taxonomy.from_dir(Path(__file__).parent / "data" / "taxonomy")


def categorize_modifier(modifier: str, taxonomy: Taxonomy) -> ModifierCategory:
    """First matching category in precedence order (artist, trending, medium,
    movement); flavor when the modifier is in no curated list."""
    for category in CATEGORY_PRECEDENCE:
        if modifier in taxonomy.members(category):
            return category
    return ModifierCategory.FLAVOR


@dataclass(frozen=True)
class VocabEntry:
    count: int
    category: ModifierCategory


@dataclass
class ModifierVocabulary:
    """Frequency-thresholded modifier label space.

    Every entry appeared strictly more than ``min_count`` times; labels are
    ordered by descending count (name as tie-break) so multi-hot encodings are
    stable.
    """

    entries: dict[str, VocabEntry]
    min_count: int
    labels: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        for modifier, entry in self.entries.items():
            if entry.count <= self.min_count:
                raise ValueError(
                    f"{modifier!r} has count {entry.count} <= min_count {self.min_count}"
                )
        self.labels = tuple(
            sorted(self.entries, key=lambda m: (-self.entries[m].count, m))
        )

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, modifier: str) -> bool:
        return modifier in self.entries

    def category(self, modifier: str) -> ModifierCategory:
        return self.entries[modifier].category

    def label_index(self) -> dict[str, int]:
        return {m: i for i, m in enumerate(self.labels)}

    def label_space_hash(self) -> str:
        return hashlib.sha256("\n".join(self.labels).encode("utf-8")).hexdigest()

    def to_json(self) -> str:
        rows = [
            {"modifier": m, "count": self.entries[m].count, "category": self.entries[m].category.value}
            for m in self.labels
        ]
        return json.dumps(rows, ensure_ascii=False, indent=2)

    @classmethod
    def from_json(cls, text: str, min_count: int) -> "ModifierVocabulary":
        rows = json.loads(text)
        entries = {
            r["modifier"]: VocabEntry(int(r["count"]), ModifierCategory(r["category"]))
            for r in rows
        }
        return cls(entries=entries, min_count=min_count)


def build_vocabulary(
    prompts: Sequence[ParsedPrompt], min_count: int, taxonomy: Taxonomy
) -> ModifierVocabulary:
    """Count each modifier once per prompt and keep those with count > min_count."""
    if min_count < 0:
        raise ValueError("min_count must be >= 0")
    if not prompts:
        raise ValueError("cannot build a vocabulary from zero prompts")
    counts: Counter[str] = Counter()
    for p in prompts:
        counts.update(p.modifiers)
    entries = {
        m: VocabEntry(c, categorize_modifier(m, taxonomy))
        for m, c in counts.items()
        if c > min_count
    }
    return ModifierVocabulary(entries=entries, min_count=min_count)
