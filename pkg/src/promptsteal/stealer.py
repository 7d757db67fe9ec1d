"""The learning-based prompt stealing attack.

A caption model produces the stolen subject; a trainable multi-label image
classifier with a per-label sigmoid head predicts the modifiers; modifiers
whose posterior is strictly above the threshold are kept and concatenated
after the subject.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from sklearn.base import BaseEstimator

from .dataset import DatasetSplit
from .images import PLANTED_SUBJECT_KEY, load_rgb, to_array
from .prompts import ModifierVocabulary, ParsedPrompt, compose_prompt
from .validation import check_positive, check_unit_interval


class StealerError(RuntimeError):
    pass


class CaptionError(StealerError):
    pass


class Attack(str, Enum):
    STEALER = "stealer"
    CAPTION_ONLY = "caption_only"
    INTERROGATOR = "interrogator"


@dataclass
class StealerConfig:
    threshold: float = 0.6
    min_count: int = 10
    train_seed: int = 0
    epochs: int = 15
    batch_size: int = 32
    learning_rate: float = 1e-3
    input_size: int = 64

    def __post_init__(self):
        check_unit_interval(self.threshold, "threshold")
        check_positive(self.epochs, "epochs")
        check_positive(self.batch_size, "batch_size")
        check_positive(self.learning_rate, "learning_rate")
        check_positive(self.input_size, "input_size")


@dataclass(frozen=True)
class StolenPrompt:
    """Attack output: subject, scored modifiers, provenance, wall-clock cost."""

    subject: str
    modifiers: tuple[tuple[str, float], ...]
    attack: Attack
    elapsed_seconds: float

    @property
    def modifier_names(self) -> tuple[str, ...]:
        return tuple(m for m, _ in self.modifiers)

    @property
    def posteriors(self) -> dict[str, float]:
        return {m: s for m, s in self.modifiers}

    def to_parsed(self) -> ParsedPrompt:
        seen, names = set(), []
        for m in self.modifier_names:
            if m not in seen:
                seen.add(m)
                names.append(m)
        return ParsedPrompt(subject=self.subject, modifiers=tuple(names))

    def compose(self) -> str:
        return compose_prompt(self.to_parsed())


def sanitize_subject(caption: str) -> str:
    """Captions become prompt subjects; commas would corrupt modifier parsing."""
    subject = " ".join(caption.replace(",", " ").split())
    if not subject:
        raise CaptionError("caption model produced an empty caption")
    return subject


class CaptionModel:
    """Contract: deterministic image -> non-empty sentence."""

    def caption(self, image) -> str:
        raise NotImplementedError


class MockCaptionModel(CaptionModel):
    """Returns the planted subject when present, else a pixel-hash caption."""

    def __init__(self, fixed: str | None = None):
        self.fixed = fixed
        self.calls = 0

    def caption(self, image) -> str:
        self.calls += 1
        if self.fixed is not None:
            return self.fixed
        img = load_rgb(image)
        planted = img.info.get(PLANTED_SUBJECT_KEY)
        if planted:
            return planted
        digest = hashlib.blake2b(img.tobytes(), digest_size=4).hexdigest()
        return f"an image of pattern {digest}"


class BlipCaptionModel(CaptionModel):
    """Adapter over a pretrained captioning checkpoint (lazy import)."""

    def __init__(self, model_name: str = "Salesforce/blip-image-captioning-base", seed: int = 0):
        from transformers import BlipForConditionalGeneration, BlipProcessor

        self.seed = seed
        self._processor = BlipProcessor.from_pretrained(model_name)
        self._model = BlipForConditionalGeneration.from_pretrained(model_name)
        self._model.eval()

    def caption(self, image) -> str:  # pragma: no cover - needs checkpoint weights
        torch.manual_seed(self.seed)
        inputs = self._processor(load_rgb(image), return_tensors="pt")
        with torch.no_grad():
            out = self._model.generate(**inputs, max_new_tokens=40)
        text = self._processor.decode(out[0], skip_special_tokens=True).strip()
        if not text:
            raise CaptionError("caption model produced empty output")
        return text


class _ConvSigmoidNet(nn.Module):
    """Small image encoder with a per-label sigmoid head (applied by callers)."""

    def __init__(self, n_labels: int, input_size: int):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 32, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(32, 64, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(64, 64, 3, stride=2, padding=1),
            nn.ReLU(),
        )
        feat = input_size // 8
        if feat < 1:
            raise ValueError(f"input_size {input_size} too small for the encoder")
        self.head = nn.Linear(64 * feat * feat, n_labels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.features(x)
        return self.head(h.flatten(1))


class ModifierClassifier(BaseEstimator):
    """Multi-label modifier classifier over a fixed label space.

    sklearn-style estimator: ``fit(X, y)`` on images and multi-hot targets,
    ``predict_proba`` for per-label posteriors, ``predict`` for thresholded
    label sets. The torch module stays differentiable w.r.t. its input, which
    the defense relies on.
    """

    def __init__(
        self,
        labels: Sequence[str] = (),
        input_size: int = 64,
        epochs: int = 15,
        batch_size: int = 32,
        learning_rate: float = 1e-3,
        seed: int = 0,
    ):
        self.labels = tuple(labels)
        self.input_size = input_size
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed

    # -- data plumbing -------------------------------------------------

    def _to_tensor(self, images: Sequence) -> torch.Tensor:
        arrays = [to_array(img) for img in images]
        batch = torch.stack([torch.from_numpy(a).permute(2, 0, 1) for a in arrays])
        return self._resize(batch)

    def _resize(self, batch: torch.Tensor) -> torch.Tensor:
        size = (self.input_size, self.input_size)
        if batch.shape[-2:] == size:
            return batch
        # Bilinear, aspect ratio not preserved.
        return F.interpolate(batch, size=size, mode="bilinear", align_corners=False)

    def _multi_hot(self, y, n: int) -> torch.Tensor:
        if not isinstance(y, np.ndarray) and len(y) > 0 and isinstance(
            y[0], (set, frozenset, list, tuple)
        ):
            y = multi_hot_batch(y, self.labels)
        y = np.asarray(y, dtype=np.float32)
        if y.shape != (n, len(self.labels)):
            raise ValueError(f"targets must have shape {(n, len(self.labels))}, got {y.shape}")
        return torch.from_numpy(y)

    # -- estimator API ---------------------------------------------------

    def fit(self, X: Sequence, y) -> "ModifierClassifier":
        if not self.labels:
            raise StealerError("label space is empty")
        if len(X) == 0:
            raise StealerError("training set is empty")
        torch.manual_seed(self.seed)
        model = _ConvSigmoidNet(len(self.labels), self.input_size)
        self._train(model, X, y, self.epochs, self.seed)
        self.model_ = model
        self.classes_ = self.labels
        self.forward_calls_ = 0
        return self

    def fit_more(self, X: Sequence, y, epochs: int | None = None, seed: int | None = None):
        """Continue training the already-fitted model on additional samples."""
        self._check_fitted()
        if len(X) == 0:
            return self
        self._train(self.model_, X, y, epochs or self.epochs, self.seed if seed is None else seed)
        return self

    def _train(self, model: nn.Module, X: Sequence, y, epochs: int, seed: int) -> None:
        inputs = self._to_tensor(X)
        targets = self._multi_hot(y, len(X))
        torch.manual_seed(seed)
        optimizer = torch.optim.Adam(model.parameters(), lr=self.learning_rate)
        criterion = nn.BCEWithLogitsLoss()
        rng = np.random.default_rng(seed)
        n = len(X)
        model.train()
        for _ in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = order[start : start + self.batch_size]
                optimizer.zero_grad()
                logits = model(inputs[idx])
                loss = criterion(logits, targets[idx])
                loss.backward()
                optimizer.step()
        model.eval()

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise StealerError("classifier is not fitted")

    def posterior_tensor(self, batch: torch.Tensor) -> torch.Tensor:
        """Differentiable posteriors for a (B, 3, H, W) float tensor in [0, 1]."""
        self._check_fitted()
        return torch.sigmoid(self.model_(self._resize(batch)))

    def logits_tensor(self, batch: torch.Tensor) -> torch.Tensor:
        self._check_fitted()
        return self.model_(self._resize(batch))

    def predict_proba(self, X: Sequence) -> np.ndarray:
        self._check_fitted()
        self.forward_calls_ += 1
        out = []
        with torch.no_grad():
            for start in range(0, len(X), 256):
                batch = self._to_tensor(X[start : start + 256])
                out.append(torch.sigmoid(self.model_(batch)).numpy())
        return np.concatenate(out, axis=0)

    def predict(self, X: Sequence, threshold: float = 0.6) -> list[set[str]]:
        check_unit_interval(threshold, "threshold")
        probs = self.predict_proba(X)
        return [
            {self.labels[j] for j in np.nonzero(row > threshold)[0]} for row in probs
        ]


def multi_hot(modifiers: Iterable[str], vocab: ModifierVocabulary) -> np.ndarray:
    """Multi-hot encoding of the given modifiers over the vocabulary label order."""
    index = vocab.label_index()
    v = np.zeros(len(vocab), dtype=np.float32)
    for m in modifiers:
        j = index.get(m)
        if j is not None:
            v[j] = 1.0
    return v


def multi_hot_batch(label_sets: Sequence[Iterable[str]], labels: Sequence[str]) -> np.ndarray:
    index = {m: i for i, m in enumerate(labels)}
    out = np.zeros((len(label_sets), len(labels)), dtype=np.float32)
    for i, mods in enumerate(label_sets):
        for m in mods:
            j = index.get(m)
            if j is not None:
                out[i, j] = 1.0
    return out


def train_classifier(
    split: DatasetSplit, vocab: ModifierVocabulary, cfg: StealerConfig
) -> ModifierClassifier:
    """Train the modifier classifier on the train half of a split."""
    if len(vocab) == 0:
        raise StealerError("vocabulary is empty")
    if not split.train:
        raise StealerError("train split is empty")
    images = [rec.load_image() for rec in split.train]
    targets = np.stack([multi_hot(rec.parsed().modifiers, vocab) for rec in split.train])
    clf = ModifierClassifier(
        labels=vocab.labels,
        input_size=cfg.input_size,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        seed=cfg.train_seed,
    )
    return clf.fit(images, targets)


def predict_modifiers(
    clf: ModifierClassifier, image, threshold: float
) -> tuple[tuple[str, float], ...]:
    """Labels whose posterior is strictly greater than the threshold, with scores,
    in label-space order."""
    check_unit_interval(threshold, "threshold")
    probs = clf.predict_proba([load_rgb(image)])[0]
    return tuple(
        (clf.labels[j], float(probs[j])) for j in np.nonzero(probs > threshold)[0]
    )


def steal_prompt(
    caption_model: CaptionModel, clf: ModifierClassifier, image, cfg: StealerConfig
) -> StolenPrompt:
    """One caption call plus one classifier forward; subject and modifiers are
    independent, so the two calls could run concurrently."""
    start = time.perf_counter()
    img = load_rgb(image)
    subject = sanitize_subject(caption_model.caption(img))
    modifiers = predict_modifiers(clf, img, cfg.threshold)
    return StolenPrompt(subject, modifiers, Attack.STEALER, time.perf_counter() - start)


# -- checkpoint I/O --------------------------------------------------------


def label_space_hash(labels: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(labels).encode("utf-8")).hexdigest()


def save_classifier(clf: ModifierClassifier, path: str | Path, cfg: StealerConfig) -> None:
    """Opaque binary checkpoint plus a sidecar JSON used to verify the label space."""
    clf._check_fitted()
    path = Path(path)
    torch.save(
        {
            "state_dict": clf.model_.state_dict(),
            "labels": list(clf.labels),
            "input_size": clf.input_size,
            "epochs": clf.epochs,
            "batch_size": clf.batch_size,
            "learning_rate": clf.learning_rate,
            "seed": clf.seed,
        },
        path,
    )
    sidecar = {
        "label_space_hash": label_space_hash(clf.labels),
        "threshold": cfg.threshold,
        "min_count": cfg.min_count,
        "train_seed": cfg.train_seed,
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2), encoding="utf-8")


def load_classifier(path: str | Path, vocab: ModifierVocabulary) -> tuple[ModifierClassifier, dict]:
    """Load a checkpoint; refuses label spaces that do not match the vocabulary."""
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
    if sidecar["label_space_hash"] != vocab.label_space_hash():
        raise StealerError("checkpoint label space does not match the provided vocabulary")
    blob = torch.load(path, map_location="cpu", weights_only=False)
    clf = ModifierClassifier(
        labels=tuple(blob["labels"]),
        input_size=blob["input_size"],
        epochs=blob["epochs"],
        batch_size=blob["batch_size"],
        learning_rate=blob["learning_rate"],
        seed=blob["seed"],
    )
    model = _ConvSigmoidNet(len(clf.labels), clf.input_size)
    model.load_state_dict(blob["state_dict"])
    model.eval()
    clf.model_ = model
    clf.classes_ = clf.labels
    clf.forward_calls_ = 0
    return clf, sidecar
