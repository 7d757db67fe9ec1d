"""Input validation helpers shared across estimators and pipeline operations."""

from __future__ import annotations

import numpy as np


def check_fraction(value: float, name: str = "fraction") -> float:
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must be in (0, 1), got {value}")
    return float(value)


def check_unit_interval(value: float, name: str = "value") -> float:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {value}")
    return float(value)


def check_positive(value, name: str = "value"):
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def check_image_array(arr: np.ndarray, name: str = "image") -> np.ndarray:
    """Float HxWx3 array in [0, 1]."""
    arr = np.asarray(arr)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must be HxWx3, got shape {arr.shape}")
    if arr.dtype.kind != "f":
        raise ValueError(f"{name} must be a float array, got dtype {arr.dtype}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, name: str = "images"):
    if a.shape != b.shape:
        raise ValueError(f"{name} have mismatched shapes: {a.shape} vs {b.shape}")
