"""Text-to-image generation backends.

The mock backend is a pure function of (prompt tokens, seed, size): it reuses
the planted-glyph renderer and stamps the prompt into the image metadata, so
the mock embedding backend sees generated images as their own prompts. Remote
backends implement the same contract over HTTP.
"""

from __future__ import annotations

import io
import threading
from collections import deque
from dataclasses import dataclass

from PIL import Image

from .embedding import tokenize
from .images import PLANTED_PROMPT_KEY, PLANTED_SUBJECT_KEY, load_rgb
from .synth import render_keyed_glyphs


class GenerationError(RuntimeError):
    def __init__(self, message: str, request=None):
        super().__init__(message)
        self.request = request


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    seed: int
    steps: int = 50
    width: int = 512
    height: int = 512

    def __post_init__(self):
        if not self.prompt or not self.prompt.strip():
            raise ValueError("prompt must be non-empty")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"dimensions must be positive, got {self.width}x{self.height}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")


class FifoLimiter:
    """Bounded in-flight window with FIFO fairness (slot hand-off on release)."""

    def __init__(self, limit: int):
        if limit < 1:
            raise ValueError("limit must be >= 1")
        self._limit = limit
        self._active = 0
        self._lock = threading.Lock()
        self._waiters: deque[threading.Event] = deque()

    def __enter__(self):
        with self._lock:
            if self._active < self._limit and not self._waiters:
                self._active += 1
                return self
            event = threading.Event()
            self._waiters.append(event)
        event.wait()
        return self

    def __exit__(self, *exc):
        with self._lock:
            if self._waiters:
                self._waiters.popleft().set()  # pass the slot, _active unchanged
            else:
                self._active -= 1
        return False

    @property
    def active(self) -> int:
        return self._active


class GenerationBackend:
    """Contract: generate() returns an RGB image of the requested size."""

    backend_id: str = "unknown"
    max_concurrency: int = 1

    def __init__(self):
        self._limiter = FifoLimiter(self.max_concurrency)

    def generate(self, req: GenerationRequest) -> Image.Image:
        with self._limiter:
            img = self._generate(req)
        if img.size != (req.width, req.height):
            raise GenerationError(
                f"backend returned {img.size}, requested {(req.width, req.height)}", req
            )
        return img

    def _generate(self, req: GenerationRequest) -> Image.Image:
        raise NotImplementedError


class MockGenerationBackend(GenerationBackend):
    backend_id = "mock"
    max_concurrency = 4

    def _generate(self, req: GenerationRequest) -> Image.Image:
        tokens = tokenize(req.prompt)
        canvas = render_keyed_glyphs(tokens, seed=req.seed, size=(req.width, req.height))
        img = Image.fromarray(canvas, mode="RGB")
        img.info[PLANTED_PROMPT_KEY] = req.prompt
        img.info[PLANTED_SUBJECT_KEY] = req.prompt.split(",")[0].strip()
        return img


class HttpGenerationBackend(GenerationBackend):
    """POST {prompt, seed, steps, width, height} -> PNG bytes."""

    backend_id = "http"

    def __init__(self, endpoint: str, timeout_seconds: float = 60.0, max_concurrency: int = 2):
        self.endpoint = endpoint
        self.timeout_seconds = timeout_seconds
        self.max_concurrency = max_concurrency
        super().__init__()

    def _generate(self, req: GenerationRequest) -> Image.Image:
        import requests

        payload = {
            "prompt": req.prompt,
            "seed": req.seed,
            "steps": req.steps,
            "width": req.width,
            "height": req.height,
        }
        try:
            resp = requests.post(self.endpoint, json=payload, timeout=self.timeout_seconds)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise GenerationError(f"generation request failed: {exc}", req) from exc
        try:
            return load_rgb(Image.open(io.BytesIO(resp.content)))
        except Exception as exc:
            raise GenerationError(f"backend returned undecodable image bytes: {exc}", req) from exc


def generate(backend: GenerationBackend, req: GenerationRequest) -> Image.Image:
    return backend.generate(req)


def create_backend(config) -> GenerationBackend:
    kind = config.get("genclient.backend", "mock")
    if kind == "mock":
        return MockGenerationBackend()
    if kind == "http":
        endpoint = config.get("genclient.endpoint", "")
        if not endpoint:
            raise ValueError("genclient.endpoint is required for the http backend")
        return HttpGenerationBackend(
            endpoint,
            timeout_seconds=float(config.get("genclient.timeout_seconds", 60.0)),
            max_concurrency=int(config.get("genclient.max_concurrency", 2)),
        )
    raise ValueError(f"unknown generation backend: {kind!r}")
