"""Targeted adversarial perturbation defense for prompt-image pairs.

The defender (with white-box gradient access to the attack classifier) zeroes
one category — artist by default — out of the target's modifier vector and
optimizes image noise so the classifier is pulled toward that shielded label
set: iterative sign-gradient steps inside an L-inf ball, or a penalty method
trading classification loss against squared-L2 noise.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .dataset import PromptImageRecord
from .images import from_array, load_rgb, save_png, to_array
from .metrics import AttackReport, evaluate_attack
from .prompts import ModifierCategory, ModifierVocabulary, ParsedPrompt, Taxonomy
from .stealer import ModifierClassifier, StolenPrompt, multi_hot
from .validation import check_image_array, check_positive, check_same_shape


class ShieldError(RuntimeError):
    pass


@dataclass
class ShieldConfig:
    method: str = "ifgsm"  # "ifgsm" | "cw"
    steps: int = 100
    epsilon: float = 0.2
    step_size: float | None = None  # defaults to epsilon / steps
    cw_learning_rate: float = 0.05
    cw_tradeoff: float = 0.001
    removed_category: ModifierCategory = ModifierCategory.ARTIST
    early_exit_loss: float = 1e-4

    def __post_init__(self):
        if self.method not in ("ifgsm", "cw"):
            raise ValueError(f"unknown shield method: {self.method!r}")
        check_positive(self.steps, "steps")
        if self.method == "ifgsm":
            check_positive(self.epsilon, "epsilon")
            if self.epsilon > 1.0:
                raise ValueError("epsilon is on the [0, 1] pixel scale")
        self.removed_category = ModifierCategory(self.removed_category)

    @property
    def effective_step_size(self) -> float:
        return self.step_size if self.step_size is not None else self.epsilon / self.steps

    def snapshot(self) -> dict:
        return {
            "method": self.method,
            "steps": self.steps,
            "epsilon": self.epsilon,
            "step_size": self.effective_step_size,
            "cw_learning_rate": self.cw_learning_rate,
            "cw_tradeoff": self.cw_tradeoff,
            "removed_category": self.removed_category.value,
            "early_exit_loss": self.early_exit_loss,
        }


@dataclass
class ShieldedImage:
    """Defended image (same size as the target), its noise, and utility cost."""

    image: np.ndarray  # float32 HxWx3 in [0, 1]
    noise: np.ndarray
    config: dict
    utility_mse: float
    linf: float
    initial_loss: float
    final_loss: float
    info: dict = field(default_factory=dict)

    def to_pil(self):
        return from_array(self.image, info=self.info)

    def save(self, path: str | Path) -> None:
        """Lossless PNG plus a sidecar JSON with config, MSE, and L-inf norm."""
        path = Path(path)
        save_png(self.to_pil(), path)
        sidecar = {
            "config": self.config,
            "utility_mse": self.utility_mse,
            "linf": self.linf,
            "initial_loss": self.initial_loss,
            "final_loss": self.final_loss,
        }
        Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2), encoding="utf-8")


def utility_mse(a, b) -> float:
    """Mean squared pixel difference on the [0, 1] scale."""
    arr_a = a if isinstance(a, np.ndarray) else to_array(a)
    arr_b = b if isinstance(b, np.ndarray) else to_array(b)
    check_same_shape(arr_a, arr_b)
    return float(np.mean((arr_a.astype(np.float64) - arr_b.astype(np.float64)) ** 2))


def shielded_label_set(
    target: ParsedPrompt, vocab: ModifierVocabulary, category: ModifierCategory
) -> np.ndarray:
    """Multi-hot target labels with every entry of the removed category zeroed."""
    v = multi_hot(target.modifiers, vocab)
    for i, label in enumerate(vocab.labels):
        if vocab.category(label) == category:
            v[i] = 0.0
    return v


def _check_gradient_access(clf: ModifierClassifier) -> None:
    if not hasattr(clf, "logits_tensor") or not hasattr(clf, "model_"):
        raise ShieldError("classifier exposes no input gradient (not differentiable or not fitted)")


def _per_sample_bce(clf: ModifierClassifier, x: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    logits = clf.logits_tensor(x)
    return F.binary_cross_entropy_with_logits(logits, targets, reduction="none").mean(dim=1)


def _optimize_ifgsm(clf, x0, targets, cfg: ShieldConfig):
    eps = cfg.epsilon
    step = cfg.effective_step_size
    x = x0.clone()
    best_x = x0.clone()
    best_loss = torch.full((x0.shape[0],), float("inf"))
    initial_loss = None
    for _ in range(cfg.steps):
        x = x.detach().requires_grad_(True)
        loss_vec = _per_sample_bce(clf, x, targets)
        if torch.isnan(loss_vec).any():
            raise ShieldError("NaN loss during shielding")
        if initial_loss is None:
            initial_loss = loss_vec.detach().clone()
        with torch.no_grad():
            improved = loss_vec.detach() < best_loss
            best_loss[improved] = loss_vec.detach()[improved]
            best_x[improved] = x.detach()[improved]
        (grad,) = torch.autograd.grad(loss_vec.sum(), x)
        with torch.no_grad():
            x = x - step * grad.sign()
            x = torch.clamp(x, x0 - eps, x0 + eps).clamp(0.0, 1.0)
    with torch.no_grad():
        final_vec = _per_sample_bce(clf, x, targets)
        improved = final_vec < best_loss
        best_loss[improved] = final_vec[improved]
        best_x[improved] = x[improved]
    return best_x, initial_loss, best_loss


def _optimize_cw(clf, x0, targets, cfg: ShieldConfig):
    delta = torch.zeros_like(x0, requires_grad=True)
    optimizer = torch.optim.Adam([delta], lr=cfg.cw_learning_rate)
    best_x = x0.clone()
    best_obj = torch.full((x0.shape[0],), float("inf"))
    initial_loss = None

    def objective(x_adv):
        bce = _per_sample_bce(clf, x_adv, targets)
        penalty = cfg.cw_tradeoff * (x_adv - x0).flatten(1).pow(2).sum(dim=1)
        return bce + penalty

    for _ in range(cfg.steps):
        optimizer.zero_grad()
        x_adv = torch.clamp(x0 + delta, 0.0, 1.0)
        obj_vec = objective(x_adv)
        if torch.isnan(obj_vec).any():
            raise ShieldError("NaN loss during shielding")
        if initial_loss is None:
            initial_loss = obj_vec.detach().clone()
        with torch.no_grad():
            improved = obj_vec.detach() < best_obj
            best_obj[improved] = obj_vec.detach()[improved]
            best_x[improved] = x_adv.detach()[improved]
        obj_vec.sum().backward()
        optimizer.step()
    with torch.no_grad():
        x_adv = torch.clamp(x0 + delta, 0.0, 1.0)
        obj_vec = objective(x_adv)
        improved = obj_vec < best_obj
        best_obj[improved] = obj_vec[improved]
        best_x[improved] = x_adv[improved]
    return best_x, initial_loss, best_obj


def shield_images(
    clf: ModifierClassifier,
    images: Sequence,
    label_vectors: Sequence[np.ndarray],
    cfg: ShieldConfig,
    original_labels: Sequence[np.ndarray] | None = None,
) -> list[ShieldedImage]:
    """Shield a batch of equally-sized images in one optimization run.

    A sample exits early (zero noise) if its shielded labels equal its original
    labels, or if its initial loss is already below the early-exit tolerance.
    """
    _check_gradient_access(clf)
    if len(images) != len(label_vectors):
        raise ValueError("images and label_vectors must have equal length")
    arrays = [check_image_array(to_array(img)) for img in images]
    infos = [load_rgb(img).info.copy() if not isinstance(img, np.ndarray) else {} for img in images]
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"batch must share one image shape, got {shapes}")
    x0 = torch.stack([torch.from_numpy(a).permute(2, 0, 1) for a in arrays])
    targets = torch.from_numpy(np.stack(label_vectors).astype(np.float32))

    skip = np.zeros(len(images), dtype=bool)
    if original_labels is not None:
        for i, orig in enumerate(original_labels):
            if orig is not None and np.array_equal(np.asarray(orig), np.asarray(label_vectors[i])):
                skip[i] = True
    with torch.no_grad():
        init_vec = _per_sample_bce(clf, x0, targets).numpy()
    skip |= init_vec < cfg.early_exit_loss

    if cfg.method == "ifgsm":
        best_x, initial_loss, final_loss = _optimize_ifgsm(clf, x0, targets, cfg)
    else:
        best_x, initial_loss, final_loss = _optimize_cw(clf, x0, targets, cfg)

    results = []
    snapshot = cfg.snapshot()
    for i in range(len(images)):
        x0_64 = arrays[i].astype(np.float64)
        if skip[i]:
            img_arr = x0_64
            noise = np.zeros_like(img_arr)
            init = fin = float(init_vec[i])
        else:
            raw = best_x[i].permute(1, 2, 0).numpy().astype(np.float64)
            # Final projection in float64 so the stored noise honors the
            # epsilon bound exactly (float32 re-rounding can overshoot it).
            noise = raw - x0_64
            if cfg.method == "ifgsm":
                noise = np.clip(noise, -cfg.epsilon, cfg.epsilon)
            img_arr = np.clip(x0_64 + noise, 0.0, 1.0)
            noise = img_arr - x0_64
            if cfg.method == "ifgsm":
                noise = np.clip(noise, -cfg.epsilon, cfg.epsilon)
                img_arr = x0_64 + noise
            init = float(initial_loss[i])
            fin = float(final_loss[i])
        results.append(
            ShieldedImage(
                image=img_arr,
                noise=noise,
                config=snapshot,
                utility_mse=utility_mse(img_arr, x0_64),
                linf=float(np.abs(noise).max()),
                initial_loss=init,
                final_loss=fin,
                info=infos[i],
            )
        )
    return results


def shield_image(
    clf: ModifierClassifier,
    image,
    shielded_labels: np.ndarray,
    cfg: ShieldConfig,
    original_labels: np.ndarray | None = None,
) -> ShieldedImage:
    return shield_images(
        clf, [image], [shielded_labels], cfg,
        original_labels=[original_labels] if original_labels is not None else None,
    )[0]


def bce_loss_and_input_gradient(
    clf: ModifierClassifier, image, targets: np.ndarray, double_precision: bool = False
) -> tuple[float, np.ndarray]:
    """Loss and d(loss)/d(input pixels); used for gradient-correctness checks."""
    _check_gradient_access(clf)
    arr = to_array(image) if not isinstance(image, np.ndarray) else image
    dtype = torch.float64 if double_precision else torch.float32
    model = clf
    if double_precision:
        model = copy.deepcopy(clf)
        model.model_ = model.model_.double()
    x = torch.from_numpy(np.asarray(arr)).to(dtype).permute(2, 0, 1).unsqueeze(0)
    x.requires_grad_(True)
    t = torch.from_numpy(np.asarray(targets, dtype=np.float64)).to(dtype).unsqueeze(0)
    loss = _per_sample_bce(model, x, t)[0]
    (grad,) = torch.autograd.grad(loss, x)
    return float(loss.detach()), grad[0].permute(1, 2, 0).numpy()


def adaptive_retrain(
    clf: ModifierClassifier,
    shielded_images: Sequence,
    label_sets: Sequence,
    cfg=None,
    epochs: int | None = None,
) -> ModifierClassifier:
    """The adaptive attack: fine-tune a copy of the classifier on shielded
    images with their ground-truth modifier labels. Zero samples is a no-op."""
    if len(shielded_images) == 0:
        return clf
    clf._check_fitted()
    adapted = ModifierClassifier(**clf.get_params())
    adapted.model_ = copy.deepcopy(clf.model_)
    adapted.classes_ = adapted.labels
    adapted.forward_calls_ = 0
    train_epochs = epochs if epochs is not None else (cfg.epochs if cfg is not None else clf.epochs)
    adapted.fit_more(shielded_images, label_sets, epochs=train_epochs)
    return adapted


@dataclass
class DefenseReport:
    unshielded: AttackReport
    shielded: AttackReport
    mean_utility_mse: float
    per_image: list[dict]  # id, utility_mse, linf
    excluded: list[tuple[str, str]]
    config: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "mean_utility_mse": self.mean_utility_mse,
            "per_image": self.per_image,
            "excluded_count": len(self.excluded),
            "excluded": [{"id": i, "error": e} for i, e in self.excluded],
            "unshielded": self.unshielded.to_dict(),
            "shielded": self.shielded.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)


def evaluate_defense(
    attack_fn: Callable[[object], StolenPrompt],
    testset: Sequence[PromptImageRecord],
    clf: ModifierClassifier,
    vocab: ModifierVocabulary,
    taxonomy: Taxonomy,
    shield_cfg: ShieldConfig,
    backend,
    genbackend,
    seeds: Sequence[int] = (0, 1, 2, 3),
    batch_size: int = 32,
    gen_size: tuple[int, int] = (512, 512),
    compute_upper_bound: bool = False,
) -> DefenseReport:
    """Run the attack on target and shielded images and report both sides.

    The shield is always optimized against the supplied classifier (the
    defender's white-box assumption); the evaluated attack may be any attack,
    including the optimization-based baseline.
    """
    if not testset:
        raise ValueError("testset must be non-empty")
    shielded_pils: dict[str, object] = {}
    per_image: list[dict] = []
    excluded: list[tuple[str, str]] = []
    kept_records: list[PromptImageRecord] = []

    pending: list[tuple[PromptImageRecord, np.ndarray, np.ndarray]] = []
    for rec in testset:
        try:
            parsed = rec.parsed()
            original = multi_hot(parsed.modifiers, vocab)
            labels = shielded_label_set(parsed, vocab, shield_cfg.removed_category)
            pending.append((rec, labels, original))
        except Exception as exc:
            excluded.append((rec.id, f"{type(exc).__name__}: {exc}"))

    for start in range(0, len(pending), batch_size):
        chunk = pending[start : start + batch_size]
        try:
            shields = shield_images(
                clf,
                [rec.load_image() for rec, _, _ in chunk],
                [labels for _, labels, _ in chunk],
                shield_cfg,
                original_labels=[orig for _, _, orig in chunk],
            )
        except Exception as exc:
            excluded.extend((rec.id, f"{type(exc).__name__}: {exc}") for rec, _, _ in chunk)
            continue
        for (rec, _, _), sh in zip(chunk, shields):
            shielded_pils[rec.id] = sh.to_pil()
            per_image.append({"id": rec.id, "utility_mse": sh.utility_mse, "linf": sh.linf})
            kept_records.append(rec)

    if not kept_records:
        raise ShieldError("every record failed to shield")

    unshielded = evaluate_attack(
        attack_fn, kept_records, backend, genbackend, taxonomy, seeds,
        attack_name="unshielded", compute_upper_bound=compute_upper_bound, gen_size=gen_size,
    )
    shielded = evaluate_attack(
        attack_fn, kept_records, backend, genbackend, taxonomy, seeds,
        attack_name="shielded", compute_upper_bound=compute_upper_bound,
        attack_images=shielded_pils, gen_size=gen_size,
    )
    return DefenseReport(
        unshielded=unshielded,
        shielded=shielded,
        mean_utility_mse=float(np.mean([row["utility_mse"] for row in per_image])),
        per_image=per_image,
        excluded=excluded,
        config=shield_cfg.snapshot(),
    )
