"""Image loading and conversion helpers.

Images travel through the toolkit as PIL RGB images. Synthetic images carry
their generating prompt in PNG text metadata (keys ``planted_prompt`` and
``planted_subject``) so the deterministic mock backends can recover it.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

PLANTED_PROMPT_KEY = "planted_prompt"
PLANTED_SUBJECT_KEY = "planted_subject"

ImageRef = "str | bytes | Path | Image.Image"


class ImageDecodeError(ValueError):
    pass


def load_rgb(ref) -> Image.Image:
    """Decode a path, raw bytes, or PIL image into RGB, keeping metadata."""
    try:
        if isinstance(ref, Image.Image):
            img = ref
        elif isinstance(ref, bytes):
            img = Image.open(io.BytesIO(ref))
            img.load()
        elif isinstance(ref, (str, Path)):
            img = Image.open(ref)
            img.load()
        else:
            raise TypeError(f"unsupported image reference type: {type(ref)!r}")
    except (OSError, TypeError, ValueError) as exc:
        raise ImageDecodeError(f"cannot decode image {ref!r}: {exc}") from exc
    return img if img.mode == "RGB" else img.convert("RGB")


def to_array(img) -> np.ndarray:
    """Image reference -> float32 HxWx3 in [0, 1]; float arrays pass through."""
    if isinstance(img, np.ndarray):
        if img.ndim != 3 or img.shape[2] != 3:
            raise ImageDecodeError(f"array image must be HxWx3, got shape {img.shape}")
        if img.dtype == np.uint8:
            return img.astype(np.float32) / 255.0
        return img.astype(np.float32)
    return np.asarray(load_rgb(img), dtype=np.float32) / 255.0


def from_array(arr: np.ndarray, info: dict | None = None) -> Image.Image:
    """Float HxWx3 in [0, 1] -> RGB PIL image (8-bit rounding)."""
    data = np.clip(np.round(np.asarray(arr) * 255.0), 0, 255).astype(np.uint8)
    img = Image.fromarray(data, mode="RGB")
    if info:
        img.info.update(info)
    return img


def to_png_bytes(img: Image.Image) -> bytes:
    """Serialize to PNG, preserving planted-prompt metadata as text chunks."""
    meta = PngInfo()
    for key in (PLANTED_PROMPT_KEY, PLANTED_SUBJECT_KEY):
        value = img.info.get(key)
        if value is not None:
            meta.add_text(key, value)
    buf = io.BytesIO()
    img.save(buf, format="PNG", pnginfo=meta)
    return buf.getvalue()


def save_png(img: Image.Image, path) -> None:
    Path(path).write_bytes(to_png_bytes(img))
