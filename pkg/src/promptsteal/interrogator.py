"""Baseline attacks: caption-only and the greedy embedding-similarity search.

The search captions the image, picks the best-scoring top-1 modifier per
keyword bank, scores every subset of those four against the image embedding,
then greedily appends the best flavor keyword per round until the similarity
stops strictly improving (or the round budget runs out).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding import EmbeddingBackend, cosine, embed_image, embed_text
from .images import load_rgb
from .stealer import Attack, CaptionModel, StolenPrompt, sanitize_subject
from .validation import check_positive


@dataclass(frozen=True)
class KeywordBanks:
    """Candidate modifier lists per category, pre-normalized."""

    flavor: tuple[str, ...]
    artist: tuple[str, ...]
    medium: tuple[str, ...]
    movement: tuple[str, ...]
    trending: tuple[str, ...]

    def __post_init__(self):
        for name in ("flavor", "artist", "medium", "movement", "trending"):
            if not getattr(self, name):
                raise ValueError(f"keyword bank {name!r} must be non-empty")

    @classmethod
    def from_dir(cls, taxonomy_dir: str | Path, flavor_file: str | Path | None = None) -> "KeywordBanks":
        """Category banks from the taxonomy files plus a flavor keyword file."""
        taxonomy_dir = Path(taxonomy_dir)
        flavor_file = Path(flavor_file) if flavor_file else taxonomy_dir / "flavor.txt"

        def read(path: Path) -> tuple[str, ...]:
            return tuple(
                line.strip() for line in path.read_text("utf-8").splitlines() if line.strip()
            )

        return cls(
            flavor=read(flavor_file),
            artist=read(taxonomy_dir / "artist.txt"),
            medium=read(taxonomy_dir / "medium.txt"),
            movement=read(taxonomy_dir / "movement.txt"),
            trending=read(taxonomy_dir / "trending.txt"),
        )


@dataclass(frozen=True)
class InterrogatorConfig:
    flavor_top_count: int = 2048
    max_iterations: int = 25

    def __post_init__(self):
        check_positive(self.flavor_top_count, "flavor_top_count")
        check_positive(self.max_iterations, "max_iterations")


def caption_baseline(caption_model: CaptionModel, image) -> StolenPrompt:
    """The caption alone is the stolen prompt; it never produces modifiers."""
    start = time.perf_counter()
    subject = sanitize_subject(caption_model.caption(load_rgb(image)))
    return StolenPrompt(subject, (), Attack.CAPTION_ONLY, time.perf_counter() - start)


def find_top_k(
    backend: EmbeddingBackend, v_image: np.ndarray, texts: list[str], k: int
) -> list[str]:
    """Top-k texts by cosine against the image vector, rank order preserved,
    ties broken by original list position; k larger than the list clamps."""
    if not texts:
        raise ValueError("texts must be non-empty")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    sims = [cosine(v_image, embed_text(backend, t)) for t in texts]
    order = sorted(range(len(texts)), key=lambda i: -sims[i])  # stable
    return [texts[i] for i in order[: min(k, len(texts))]]


# Canonical category order inside candidate prompts.
_CANDIDATE_ORDER = ("medium", "artist", "trending", "movement")


def _candidate_prompts(subject: str, tops: dict[str, str]) -> list[tuple[str, list[str]]]:
    """Subject joined with every subset of the four top category modifiers,
    in canonical order; 16 candidates including the subject alone."""
    candidates = []
    for mask in range(16):
        mods = [tops[c] for bit, c in enumerate(_CANDIDATE_ORDER) if mask >> bit & 1]
        candidates.append((", ".join([subject] + mods), mods))
    return candidates


def interrogate(
    caption_model: CaptionModel,
    backend: EmbeddingBackend,
    image,
    banks: KeywordBanks,
    cfg: InterrogatorConfig = InterrogatorConfig(),
) -> StolenPrompt:
    start = time.perf_counter()
    img = load_rgb(image)
    subject = sanitize_subject(caption_model.caption(img))
    v_image = embed_image(backend, img)

    tops = {
        "artist": find_top_k(backend, v_image, list(banks.artist), 1)[0],
        "medium": find_top_k(backend, v_image, list(banks.medium), 1)[0],
        "movement": find_top_k(backend, v_image, list(banks.movement), 1)[0],
        "trending": find_top_k(backend, v_image, list(banks.trending), 1)[0],
    }

    candidates = _candidate_prompts(subject, tops)
    scores = [cosine(v_image, embed_text(backend, text)) for text, _ in candidates]
    best_idx = max(range(len(candidates)), key=lambda i: scores[i])  # first on ties
    prompt_text, kept = candidates[best_idx]
    sim_best = scores[best_idx]
    modifiers = [(m, sim_best) for m in kept]

    pool = find_top_k(backend, v_image, list(banks.flavor), cfg.flavor_top_count)
    for _ in range(cfg.max_iterations):
        if not pool:
            break
        extended = [prompt_text + ", " + k for k in pool]
        sims = [cosine(v_image, embed_text(backend, t)) for t in extended]
        j = max(range(len(pool)), key=lambda i: sims[i])  # first on ties
        best_flavor = pool.pop(j)
        if sims[j] > sim_best:
            sim_best = sims[j]
            prompt_text = extended[j]
            modifiers.append((best_flavor, sims[j]))
        else:
            break

    return StolenPrompt(
        subject, tuple(modifiers), Attack.INTERROGATOR, time.perf_counter() - start
    )


def create_banks(config) -> KeywordBanks:
    taxonomy_dir = config.get("paths.taxonomy_dir") or (
        Path(__file__).parent / "data" / "taxonomy"
    )
    return KeywordBanks.from_dir(taxonomy_dir, config.get("paths.flavor_file"))
