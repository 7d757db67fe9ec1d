"""Prompt stealing toolkit: attacks, baselines, evaluation, and the shield defense."""

from .prompts import (
    ModifierCategory,
    ModifierVocabulary,
    ParsedPrompt,
    Taxonomy,
    build_vocabulary,
    categorize_modifier,
    compose_prompt,
    normalize_modifier,
    parse_prompt,
)

__all__ = [
    "ModifierCategory",
    "ModifierVocabulary",
    "ParsedPrompt",
    "Taxonomy",
    "build_vocabulary",
    "categorize_modifier",
    "compose_prompt",
    "normalize_modifier",
    "parse_prompt",
]

__version__ = "0.1.0"
