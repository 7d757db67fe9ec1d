"""Flat dotted-key configuration loaded from a TOML file."""

from __future__ import annotations

import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULTS = {
    "embedding.backend": "mock",
    "embedding.mock_seed": 0,
    "embedding.model": "clip-ViT-B-32",
    "genclient.backend": "mock",
    "genclient.endpoint": "",
    "genclient.timeout_seconds": 60.0,
    "genclient.max_concurrency": 2,
    "genclient.steps": 50,
    "genclient.width": 512,
    "genclient.height": 512,
    "stealer.threshold": 0.6,
    "stealer.min_count": 10,
    "stealer.train_seed": 0,
    "stealer.epochs": 15,
    "stealer.batch_size": 32,
    "stealer.learning_rate": 1e-3,
    "stealer.input_size": 64,
    "interrogator.flavor_top_count": 2048,
    "interrogator.max_iterations": 25,
    "shield.method": "ifgsm",
    "shield.steps": 100,
    "shield.epsilon": 0.2,
    "shield.cw_learning_rate": 0.05,
    "shield.cw_tradeoff": 0.001,
    "shield.removed_category": "artist",
    "metrics.seeds": [0, 1, 2, 3],
    "service.db_path": "sessions.db",
    "service.image_dir": "session_images",
    "service.session_ttl_seconds": 86400.0,
    "service.checkpoint": "",
    "service.vocabulary": "",
    "paths.taxonomy_dir": "",
    "paths.flavor_file": "",
}


def _flatten(table: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in table.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, dotted + "."))
        else:
            flat[dotted] = value
    return flat


class Config:
    def __init__(self, values: dict | None = None):
        self._values = dict(DEFAULTS)
        if values:
            self._values.update(values)

    def get(self, key: str, default=None):
        # Empty strings mean "unset" for path-like keys.
        value = self._values.get(key)
        if value is None or value == "":
            return default
        return value

    def __getitem__(self, key: str):
        return self._values[key]

    def set(self, key: str, value) -> None:
        self._values[key] = value

    def as_dict(self) -> dict:
        return dict(self._values)


def load_config(path: str | Path | None = None) -> Config:
    if path is None:
        return Config()
    with Path(path).open("rb") as fh:
        return Config(_flatten(tomllib.load(fh)))
