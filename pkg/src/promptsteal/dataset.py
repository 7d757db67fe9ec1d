"""Prompt-image record ingestion, deduplication/splitting, and corpus statistics."""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from PIL import Image

from .images import load_rgb
from .prompts import (
    CATEGORIES,
    ModifierCategory,
    ModifierVocabulary,
    ParsedPrompt,
    Taxonomy,
    categorize_modifier,
    compose_prompt,
    parse_prompt,
)
from .validation import check_fraction


class DatasetError(ValueError):
    pass


@dataclass
class PromptImageRecord:
    """One prompt-image pair. ``image`` is a path, raw bytes, or a PIL image."""

    id: str
    prompt: str
    image: "str | bytes | Image.Image"
    width: int
    height: int
    source: str = ""

    def load_image(self) -> Image.Image:
        return load_rgb(self.image)

    def parsed(self) -> ParsedPrompt:
        return parse_prompt(self.prompt)


@dataclass(frozen=True)
class IngestError:
    line_no: int
    reason: str


@dataclass
class IngestResult:
    records: list[PromptImageRecord]
    errors: list[IngestError]


_REQUIRED_FIELDS = ("id", "prompt", "image", "width", "height", "source")


def load_records(path: str | Path) -> IngestResult:
    """Read JSONL records; invalid lines go to the error report, never dropped
    silently. Image paths are resolved relative to the JSONL file."""
    path = Path(path)
    base = path.parent
    records: list[PromptImageRecord] = []
    errors: list[IngestError] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append(IngestError(line_no, f"invalid JSON: {exc}"))
                continue
            missing = [f for f in _REQUIRED_FIELDS if f not in row]
            if missing:
                errors.append(IngestError(line_no, f"missing fields: {', '.join(missing)}"))
                continue
            if not str(row["prompt"]).strip():
                errors.append(IngestError(line_no, "empty prompt"))
                continue
            image_path = base / str(row["image"])
            if not image_path.exists():
                errors.append(IngestError(line_no, f"image file not found: {row['image']}"))
                continue
            records.append(
                PromptImageRecord(
                    id=str(row["id"]),
                    prompt=str(row["prompt"]),
                    image=str(image_path),
                    width=int(row["width"]),
                    height=int(row["height"]),
                    source=str(row["source"]),
                )
            )
    if not records:
        raise DatasetError(f"no valid records in {path} ({len(errors)} invalid lines)")
    return IngestResult(records=records, errors=errors)


@dataclass
class DatasetSplit:
    train: list[PromptImageRecord]
    test: list[PromptImageRecord]
    seed: int

    def __len__(self) -> int:
        return len(self.train) + len(self.test)


def dedupe_and_split(
    records: Sequence[PromptImageRecord], train_fraction: float = 0.8, seed: int = 0
) -> DatasetSplit:
    """Drop duplicate prompts (normalized composed text, first occurrence kept),
    shuffle by seed, and put the first floor(n * fraction) records in train."""
    check_fraction(train_fraction, "train_fraction")
    unique: list[PromptImageRecord] = []
    seen: set[str] = set()
    for rec in records:
        key = compose_prompt(parse_prompt(rec.prompt))
        if key not in seen:
            seen.add(key)
            unique.append(rec)
    if len(unique) < 2:
        raise DatasetError(f"need at least 2 unique prompts, got {len(unique)}")
    shuffled = list(unique)
    random.Random(seed).shuffle(shuffled)
    n_train = math.floor(len(shuffled) * train_fraction)
    return DatasetSplit(train=shuffled[:n_train], test=shuffled[n_train:], seed=seed)


@dataclass
class DatasetStats:
    prompt_count: int
    modifier_count: int
    mean_modifiers_per_prompt: float
    appearance_histogram: dict[str, int]
    category_proportions: dict[str, float]
    top_per_category: dict[str, list[tuple[str, int]]]

    def to_json(self) -> str:
        return json.dumps(
            {
                "prompt_count": self.prompt_count,
                "modifier_count": self.modifier_count,
                "mean_modifiers_per_prompt": self.mean_modifiers_per_prompt,
                "appearance_histogram": self.appearance_histogram,
                "category_proportions": self.category_proportions,
                "top_per_category": {c: [list(t) for t in rows] for c, rows in self.top_per_category.items()},
            },
            ensure_ascii=False,
            indent=2,
        )


def compute_stats(
    records: Sequence[PromptImageRecord],
    taxonomy: Taxonomy,
    vocabulary: ModifierVocabulary | None = None,
    top_k: int = 10,
) -> DatasetStats:
    """Parse every prompt and aggregate the corpus-level modifier statistics.

    Category proportions are per-prompt fractions averaged over prompts that
    have at least one modifier, so they sum to 1 across the five categories.
    """
    if not records:
        raise DatasetError("cannot compute stats on an empty record list")

    def category_of(m: str) -> ModifierCategory:
        if vocabulary is not None and m in vocabulary:
            return vocabulary.category(m)
        return categorize_modifier(m, taxonomy)

    appearance: Counter[str] = Counter()
    total_modifiers = 0
    proportion_sums = {c: 0.0 for c in CATEGORIES}
    prompts_with_modifiers = 0
    for rec in records:
        parsed = rec.parsed()
        appearance.update(parsed.modifiers)
        total_modifiers += len(parsed.modifiers)
        if parsed.modifiers:
            prompts_with_modifiers += 1
            per_cat = Counter(category_of(m) for m in parsed.modifiers)
            for c in CATEGORIES:
                proportion_sums[c] += per_cat.get(c, 0) / len(parsed.modifiers)

    proportions = {
        c.value: (proportion_sums[c] / prompts_with_modifiers if prompts_with_modifiers else 0.0)
        for c in CATEGORIES
    }
    by_category: dict[str, list[tuple[str, int]]] = {c.value: [] for c in CATEGORIES}
    for m, count in appearance.items():
        by_category[category_of(m).value].append((m, count))
    top = {
        c: sorted(rows, key=lambda t: (-t[1], t[0]))[:top_k]
        for c, rows in by_category.items()
    }
    return DatasetStats(
        prompt_count=len(records),
        modifier_count=len(appearance),
        mean_modifiers_per_prompt=total_modifiers / len(records),
        appearance_histogram=dict(appearance),
        category_proportions=proportions,
        top_per_category=top,
    )
