"""Joint text-image embedding backends and similarity math.

The mock backend hashes each token of a text into one of ``dim`` buckets and
accumulates counts, so two texts embed identically iff they share the same
token bag, and token-disjoint texts (without bucket collisions) are exactly
orthogonal. Synthetic images embed as the text embedding of their planted
prompt, which makes "similarity == token overlap" exact and gives the greedy
interrogator an enumerable oracle.
"""

from __future__ import annotations

import hashlib
import threading
from typing import Sequence

import numpy as np

from .images import PLANTED_PROMPT_KEY, load_rgb


class EmbeddingError(RuntimeError):
    """Backend failure, carrying the offending input."""

    def __init__(self, message: str, offending_input=None):
        super().__init__(message)
        self.offending_input = offending_input


def l2_normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not np.isfinite(norm):
        raise EmbeddingError("cannot normalize a zero or non-finite vector", v)
    return v / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two vectors; raises on dim mismatch or zero vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(l2_normalize(a), l2_normalize(b)))


def tokenize(text: str) -> list[str]:
    """Mock-backend tokens: lowercase, split on commas and whitespace."""
    return text.lower().replace(",", " ").split()


class EmbeddingBackend:
    """Contract: deterministic text/image encoders sharing one vector space."""

    dim: int
    thread_safe: bool = True

    def embed_text(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def embed_image(self, image) -> np.ndarray:
        raise NotImplementedError


class MockEmbeddingBackend(EmbeddingBackend):
    """Hashed bag-of-tokens text encoder plus planted-metadata image encoder.

    Instrument counters ``text_calls`` / ``image_calls`` count embedded items
    (a batch of n texts counts n).
    """

    def __init__(self, dim: int = 512, seed: int = 0):
        self.dim = int(dim)
        self.seed = int(seed)
        self.text_calls = 0
        self.image_calls = 0

    def reset_counts(self) -> None:
        self.text_calls = 0
        self.image_calls = 0

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(f"{self.seed}:{token}".encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dim

    def _text_vector(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            raise EmbeddingError("cannot embed empty text", text)
        v = np.zeros(self.dim, dtype=np.float64)
        for token in tokens:
            v[self._bucket(token)] += 1.0
        return l2_normalize(v)

    def embed_text(self, text: str) -> np.ndarray:
        self.text_calls += 1
        return self._text_vector(text)

    def embed_image(self, image) -> np.ndarray:
        self.image_calls += 1
        img = load_rgb(image)
        planted = img.info.get(PLANTED_PROMPT_KEY)
        if planted:
            return self._text_vector(planted)
        # No planted metadata: hash the raw pixels into a single bucket.
        digest = hashlib.blake2b(img.tobytes(), digest_size=8).digest()
        v = np.zeros(self.dim, dtype=np.float64)
        v[int.from_bytes(digest, "big") % self.dim] = 1.0
        return v


class ClipLikeBackend(EmbeddingBackend):
    """Adapter over a published joint-embedding checkpoint (lazy import).

    Which checkpoint to load is a config choice (``embedding.model``); nothing
    is hardcoded and the model is only downloaded when this backend is built.
    """

    thread_safe = False

    def __init__(self, model_name: str = "clip-ViT-B-32"):
        from sentence_transformers import SentenceTransformer

        self.model_name = model_name
        self._model = SentenceTransformer(model_name)
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def embed_text(self, text: str) -> np.ndarray:
        if not text:
            raise EmbeddingError("cannot embed empty text", text)
        try:
            return l2_normalize(self._model.encode(text))
        except Exception as exc:  # pragma: no cover - depends on checkpoint
            raise EmbeddingError(f"text encoder failed: {exc}", text) from exc

    def embed_image(self, image) -> np.ndarray:
        try:
            return l2_normalize(self._model.encode(load_rgb(image)))
        except Exception as exc:  # pragma: no cover - depends on checkpoint
            raise EmbeddingError(f"image encoder failed: {exc}", image) from exc


class SerializedBackend(EmbeddingBackend):
    """Serializes calls to a single-threaded backend through one lock."""

    def __init__(self, inner: EmbeddingBackend):
        self.inner = inner
        self.dim = inner.dim
        self.thread_safe = True
        self._lock = threading.Lock()

    def embed_text(self, text: str) -> np.ndarray:
        with self._lock:
            return self.inner.embed_text(text)

    def embed_image(self, image) -> np.ndarray:
        with self._lock:
            return self.inner.embed_image(image)


def embed_text(backend: EmbeddingBackend, text: str) -> np.ndarray:
    """Unit-norm text embedding; backend failures surface as EmbeddingError."""
    if not text or not text.strip():
        raise EmbeddingError("text must be non-empty", text)
    try:
        v = backend.embed_text(text)
    except EmbeddingError:
        raise
    except Exception as exc:
        raise EmbeddingError(f"embed_text failed on {text!r}: {exc}", text) from exc
    return l2_normalize(v)


def embed_image(backend: EmbeddingBackend, image) -> np.ndarray:
    """Unit-norm image embedding; backend failures surface as EmbeddingError."""
    try:
        v = backend.embed_image(image)
    except EmbeddingError:
        raise
    except Exception as exc:
        raise EmbeddingError(f"embed_image failed: {exc}", image) from exc
    return l2_normalize(v)


def embed_texts(backend: EmbeddingBackend, texts: Sequence[str]) -> np.ndarray:
    return np.stack([embed_text(backend, t) for t in texts])


def create_backend(config) -> EmbeddingBackend:
    """Build the configured backend; single-threaded backends get serialized."""
    kind = config.get("embedding.backend", "mock")
    if kind == "mock":
        return MockEmbeddingBackend(seed=int(config.get("embedding.mock_seed", 0)))
    if kind == "clip-like":
        backend = ClipLikeBackend(model_name=config.get("embedding.model", "clip-ViT-B-32"))
        return SerializedBackend(backend)
    raise ValueError(f"unknown embedding backend: {kind!r}")
