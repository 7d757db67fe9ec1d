"""Attack evaluation: the four adversary metrics, aggregation, and report export.

Semantic similarity is the cosine of prompt embeddings; modifier similarity is
the Jaccard index of normalized modifier sets (absent when the attack emitted
no modifiers, 1.0 when both sides are empty after a category filter); image
similarity averages the cosine between the target image and images regenerated
from the stolen prompt over a fixed seed list; efficiency is wall-clock
seconds around per-sample inference only.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .dataset import PromptImageRecord
from .embedding import EmbeddingBackend, cosine, embed_image, embed_text
from .genclient import GenerationBackend, GenerationRequest
from .prompts import (
    CATEGORIES,
    ModifierCategory,
    ParsedPrompt,
    Taxonomy,
    categorize_modifier,
)
from .stealer import StolenPrompt

DEFAULT_SEEDS = (0, 1, 2, 3)


def semantic_similarity(backend: EmbeddingBackend, target: str, stolen: str) -> float:
    return cosine(embed_text(backend, target), embed_text(backend, stolen))


def _filter_categories(
    modifiers: Iterable[str], categories, taxonomy: Taxonomy
) -> frozenset[str]:
    keep = {ModifierCategory(c) for c in (categories if not isinstance(categories, (str, ModifierCategory)) else [categories])}
    return frozenset(m for m in modifiers if categorize_modifier(m, taxonomy) in keep)


def modifier_similarity(
    target: ParsedPrompt,
    stolen: ParsedPrompt,
    categories=None,
    taxonomy: Taxonomy | None = None,
) -> float | None:
    """Jaccard over normalized modifier sets; None when the attack produced no
    modifiers at all; 1.0 when both sides are empty after the category filter."""
    if not stolen.modifiers:
        return None
    a, b = target.modifier_set, stolen.modifier_set
    if categories is not None:
        if taxonomy is None:
            raise ValueError("a taxonomy is required to filter by category")
        a = _filter_categories(a, categories, taxonomy)
        b = _filter_categories(b, categories, taxonomy)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def image_similarity(
    backend: EmbeddingBackend,
    genbackend: GenerationBackend,
    target_image,
    stolen_prompt: str,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    steps: int = 50,
    size: tuple[int, int] = (512, 512),
) -> float:
    """Mean cosine between the target image and one regeneration per seed.
    Any generation failure aborts; there is no silent mean over fewer images."""
    if not seeds:
        raise ValueError("seeds must be non-empty")
    v_target = embed_image(backend, target_image)
    sims = []
    for seed in seeds:
        req = GenerationRequest(
            prompt=stolen_prompt, seed=int(seed), steps=steps, width=size[0], height=size[1]
        )
        generated = genbackend.generate(req)
        sims.append(cosine(v_target, embed_image(backend, generated)))
    return float(np.mean(sims))


@dataclass
class SimilarityScores:
    semantic: float
    modifier: float | None
    per_category_modifier: dict[str, float | None]
    image: float
    elapsed_seconds: float


@dataclass
class SampleResult:
    id: str
    target_prompt: str
    stolen_prompt: str
    scores: SimilarityScores


def _clamp(x: float | None) -> float | None:
    # Reports clamp negative cosines to zero; raw values stay on the scores.
    if x is None:
        return None
    return max(0.0, x)


def _mean(values: list[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


@dataclass
class AttackReport:
    attack: str
    samples: list[SampleResult]
    excluded: list[tuple[str, str]]  # (record id, error)
    config: dict
    upper_bound_image_similarity: float | None = None
    means: dict = field(init=False)

    def __post_init__(self):
        rows = [self.row(s) for s in self.samples]
        self.means = {
            "semantic": _mean([r["semantic"] for r in rows]),
            "modifier": _mean([r["modifier"] for r in rows]),
            "image": _mean([r["image"] for r in rows]),
            "seconds": _mean([r["seconds"] for r in rows]),
        }
        for c in CATEGORIES:
            self.means[f"modifier_{c.value}"] = _mean([r[f"modifier_{c.value}"] for r in rows])

    @staticmethod
    def row(sample: SampleResult) -> dict:
        s = sample.scores
        out = {
            "id": sample.id,
            "semantic": _clamp(s.semantic),
            "modifier": _clamp(s.modifier),
            "image": _clamp(s.image),
            "seconds": s.elapsed_seconds,
        }
        for c in CATEGORIES:
            out[f"modifier_{c.value}"] = _clamp(s.per_category_modifier.get(c.value))
        return out

    def to_dict(self) -> dict:
        return {
            "attack": self.attack,
            "config": self.config,
            "means": self.means,
            "upper_bound_image_similarity": self.upper_bound_image_similarity,
            "excluded_count": len(self.excluded),
            "excluded": [{"id": i, "error": e} for i, e in self.excluded],
            "samples": [
                dict(self.row(s), target_prompt=s.target_prompt, stolen_prompt=s.stolen_prompt)
                for s in self.samples
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        columns = ["id", "semantic", "modifier"] + [
            f"modifier_{c}" for c in ("artist", "trending", "medium", "movement", "flavor")
        ] + ["image", "seconds"]
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for s in self.samples:
            writer.writerow(self.row(s))
        return buf.getvalue()


def score_sample(
    record: PromptImageRecord,
    stolen: StolenPrompt,
    backend: EmbeddingBackend,
    genbackend: GenerationBackend,
    taxonomy: Taxonomy,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    elapsed_seconds: float | None = None,
    gen_size: tuple[int, int] = (512, 512),
) -> SimilarityScores:
    target_parsed = record.parsed()
    stolen_parsed = stolen.to_parsed()
    per_category = {
        c.value: modifier_similarity(target_parsed, stolen_parsed, c, taxonomy)
        for c in CATEGORIES
    }
    return SimilarityScores(
        semantic=semantic_similarity(backend, record.prompt, stolen.compose()),
        modifier=modifier_similarity(target_parsed, stolen_parsed),
        per_category_modifier=per_category,
        image=image_similarity(
            backend, genbackend, record.load_image(), stolen.compose(), seeds, size=gen_size
        ),
        elapsed_seconds=elapsed_seconds if elapsed_seconds is not None else stolen.elapsed_seconds,
    )


def evaluate_attack(
    attack_fn: Callable[[object], StolenPrompt],
    testset: Sequence[PromptImageRecord],
    backend: EmbeddingBackend,
    genbackend: GenerationBackend,
    taxonomy: Taxonomy,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    attack_name: str | None = None,
    config: dict | None = None,
    compute_upper_bound: bool = True,
    attack_images: dict[str, object] | None = None,
    timer: Callable[[], float] = time.perf_counter,
    gen_size: tuple[int, int] = (512, 512),
) -> AttackReport:
    """Run an attack over the test set and aggregate all metrics.

    ``attack_images`` optionally overrides the image given to the attack per
    record id (the defense evaluates attacks on shielded pixels while metrics
    keep comparing against the original target). Per-sample failures are
    recorded and excluded, never silently averaged over.
    """
    if not testset:
        raise ValueError("testset must be non-empty")
    samples: list[SampleResult] = []
    excluded: list[tuple[str, str]] = []
    upper_bounds: list[float] = []
    for record in testset:
        try:
            image_for_attack = (
                attack_images[record.id]
                if attack_images is not None and record.id in attack_images
                else record.image
            )
            t0 = timer()
            stolen = attack_fn(image_for_attack)
            elapsed = timer() - t0
            scores = score_sample(
                record, stolen, backend, genbackend, taxonomy, seeds,
                elapsed_seconds=elapsed, gen_size=gen_size,
            )
            if compute_upper_bound:
                upper_bounds.append(
                    image_similarity(
                        backend, genbackend, record.load_image(), record.prompt, seeds,
                        size=gen_size,
                    )
                )
            samples.append(
                SampleResult(
                    id=record.id,
                    target_prompt=record.prompt,
                    stolen_prompt=stolen.compose(),
                    scores=scores,
                )
            )
        except Exception as exc:
            excluded.append((record.id, f"{type(exc).__name__}: {exc}"))
    return AttackReport(
        attack=attack_name or "attack",
        samples=samples,
        excluded=excluded,
        config=dict(config or {}),
        upper_bound_image_similarity=float(np.mean(upper_bounds)) if upper_bounds else None,
    )


# -- plots and projection ----------------------------------------------------


@dataclass(frozen=True)
class ProjectedPoint:
    modifier: str
    category: str
    x: float
    y: float


def project_modifiers(
    backend: EmbeddingBackend,
    modifiers: Sequence[str],
    taxonomy: Taxonomy,
    seed: int = 0,
    method: str = "pca",
) -> list[ProjectedPoint]:
    """Embed modifiers and reduce to 2-D, tagging each point with its category.

    The default linear projection is deterministic and maps duplicate
    modifiers to coincident points; ``method="tsne"`` is available for large
    real-backend runs where local neighborhood structure matters more.
    """
    if not modifiers:
        raise ValueError("modifiers must be non-empty")
    vectors = np.stack([embed_text(backend, m) for m in modifiers])
    if method == "pca" or len(modifiers) <= 5:
        from sklearn.decomposition import PCA

        # fit + transform (not fit_transform): the plain matrix product maps
        # duplicate modifiers to bitwise-coincident points.
        pca = PCA(n_components=2, random_state=seed).fit(vectors)
        coords = pca.transform(vectors)
    elif method == "tsne":
        from sklearn.manifold import TSNE

        perplexity = min(30.0, max(2.0, (len(modifiers) - 1) / 3))
        coords = TSNE(
            n_components=2, random_state=seed, init="pca", perplexity=perplexity
        ).fit_transform(vectors)
    else:
        raise ValueError(f"unknown projection method: {method!r}")
    return [
        ProjectedPoint(
            modifier=m,
            category=categorize_modifier(m, taxonomy).value,
            x=float(coords[i, 0]),
            y=float(coords[i, 1]),
        )
        for i, m in enumerate(modifiers)
    ]


def bar_chart_spec(reports: Sequence[AttackReport]) -> dict:
    """Grouped-bar chart spec comparing attacks per metric (JSON-serializable)."""
    metrics = ["semantic", "modifier", "image"]
    return {
        "kind": "grouped_bar",
        "metrics": metrics,
        "series": [
            {
                "attack": r.attack,
                "values": {m: r.means.get(m) for m in metrics},
                "upper_bound_image_similarity": r.upper_bound_image_similarity,
            }
            for r in reports
        ],
    }


def projection_plot_spec(points: Sequence[ProjectedPoint]) -> dict:
    return {
        "kind": "scatter_2d",
        "points": [
            {"modifier": p.modifier, "category": p.category, "x": p.x, "y": p.y}
            for p in points
        ],
    }


def write_report_files(report: AttackReport, out_dir: str | Path, stem: str = "report") -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / f"{stem}.json"
    csv_path = out_dir / f"{stem}.csv"
    spec_path = out_dir / f"{stem}_bars.json"
    json_path.write_text(report.to_json(), encoding="utf-8")
    csv_path.write_text(report.to_csv(), encoding="utf-8")
    spec_path.write_text(json.dumps(bar_chart_spec([report]), indent=2), encoding="utf-8")
    return [json_path, csv_path, spec_path]
