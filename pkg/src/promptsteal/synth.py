"""Synthetic planted-glyph images: the desk-scale ground truth.

Every key (a modifier, or a prompt token) deterministically owns one grid
cell and one bright color, both derived from a hash of the key. An image
"contains" a key iff its glyph is painted, so modifier recoverability is
ground-truthed: a classifier can be trained and verified against the
generating labels, and the mock generation backend can reuse the same
renderer so attack, defense, and metric pipelines stay mutually consistent.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .images import PLANTED_PROMPT_KEY, PLANTED_SUBJECT_KEY, save_png
from .prompts import ModifierCategory, ParsedPrompt, Taxonomy, compose_prompt

GLYPH_GRID = 16           # 16x16 cells per image
NOISE_LEVEL = 90          # background noise in [0, NOISE_LEVEL)
GLYPH_LOW, GLYPH_HIGH = 140, 256  # glyph channel range, clearly above noise


def _digest(key: str) -> bytes:
    return hashlib.blake2b(key.encode("utf-8"), digest_size=16).digest()


def glyph_cell(key: str) -> tuple[int, int]:
    d = _digest(key)
    cell = int.from_bytes(d[:4], "big") % (GLYPH_GRID * GLYPH_GRID)
    return cell // GLYPH_GRID, cell % GLYPH_GRID


def glyph_color(key: str) -> tuple[int, int, int]:
    d = _digest(key)
    span = GLYPH_HIGH - GLYPH_LOW
    return tuple(GLYPH_LOW + d[4 + i] % span for i in range(3))


def render_keyed_glyphs(
    keys: Iterable[str], seed: int, size: tuple[int, int] = (64, 64)
) -> np.ndarray:
    """Paint one glyph per key over a seed-keyed noise background (uint8 HxWx3)."""
    w, h = size
    rng = np.random.default_rng(seed & 0xFFFFFFFF)
    canvas = rng.integers(0, NOISE_LEVEL, size=(h, w, 3), dtype=np.uint8)
    cell_h = max(1, h // GLYPH_GRID)
    cell_w = max(1, w // GLYPH_GRID)
    for key in keys:
        row, col = glyph_cell(key)
        y0, x0 = row * cell_h, col * cell_w
        canvas[y0 : y0 + cell_h, x0 : x0 + cell_w] = glyph_color(key)
    return canvas


def make_planted_image(
    keys: Sequence[str],
    seed: int,
    size: tuple[int, int] = (64, 64),
    prompt: str | None = None,
    subject: str | None = None,
) -> Image.Image:
    """Glyph image carrying its generating prompt/subject as PNG metadata."""
    img = Image.fromarray(render_keyed_glyphs(keys, seed, size), mode="RGB")
    if prompt is not None:
        img.info[PLANTED_PROMPT_KEY] = prompt
    if subject is not None:
        img.info[PLANTED_SUBJECT_KEY] = subject
    return img


def synthetic_label_space(per_category: int = 10) -> tuple[list[str], Taxonomy]:
    """Single-token label names, ``per_category`` for each of the five categories."""
    names = {
        ModifierCategory.ARTIST: [f"painter{i:02d}" for i in range(per_category)],
        ModifierCategory.TRENDING: [f"gallery{i:02d}" for i in range(per_category)],
        ModifierCategory.MEDIUM: [f"medium{i:02d}" for i in range(per_category)],
        ModifierCategory.MOVEMENT: [f"movement{i:02d}" for i in range(per_category)],
        ModifierCategory.FLAVOR: [f"flavor{i:02d}" for i in range(per_category)],
    }
    taxonomy = Taxonomy.from_lists(
        {c: names[c] for c in (ModifierCategory.ARTIST, ModifierCategory.TRENDING,
                               ModifierCategory.MEDIUM, ModifierCategory.MOVEMENT)}
    )
    modifiers = [m for c in names for m in names[c]]
    return modifiers, taxonomy


def make_planted_records(
    n_samples: int,
    modifiers: Sequence[str],
    seed: int = 0,
    size: tuple[int, int] = (64, 64),
    subject: str = "a scene",
    min_modifiers: int = 1,
    max_modifiers: int = 5,
    artist_pool: Sequence[str] | None = None,
):
    """Planted prompt-image records: each sample draws 1-5 modifiers and renders
    their glyphs; the prompt is "<subject>, <modifiers>".

    When ``artist_pool`` is given, every sample includes at least one modifier
    from it (useful for defense fixtures where each target must have artist
    evidence to remove).
    """
    from .dataset import PromptImageRecord

    rng = np.random.default_rng(seed)
    records = []
    pool = list(modifiers)
    artists = [m for m in (artist_pool or []) if m in set(pool)]
    rest = [m for m in pool if m not in set(artists)] if artists else pool
    for i in range(n_samples):
        k = int(rng.integers(min_modifiers, max_modifiers + 1))
        if artists:
            chosen = [artists[int(rng.integers(len(artists)))]]
            extra = rng.choice(len(rest), size=min(k - 1, len(rest)), replace=False) if k > 1 else []
            chosen += [rest[int(j)] for j in extra]
        else:
            idx = rng.choice(len(pool), size=min(k, len(pool)), replace=False)
            chosen = [pool[int(j)] for j in idx]
        prompt = compose_prompt(ParsedPrompt(subject=subject, modifiers=tuple(chosen)))
        img = make_planted_image(chosen, seed=int(rng.integers(2**31)), size=size,
                                 prompt=prompt, subject=subject)
        records.append(
            PromptImageRecord(
                id=f"synth-{i:05d}", prompt=prompt, image=img,
                width=size[0], height=size[1], source="synthetic",
            )
        )
    return records


def write_planted_dataset(records, out_dir: str | Path) -> Path:
    """Write records as JSONL + PNG files (the ingest wire format)."""
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for rec in records:
        rel = f"images/{rec.id}.png"
        save_png(rec.load_image(), out_dir / rel)
        lines.append(json.dumps({
            "id": rec.id, "prompt": rec.prompt, "image": rel,
            "width": rec.width, "height": rec.height, "source": rec.source,
        }, ensure_ascii=False))
    path = out_dir / "records.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
