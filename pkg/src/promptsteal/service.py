"""HTTP service powering the adversary-in-the-loop console.

Sessions hold a target image, a mutable working copy of the stolen prompt,
and an append-only history of edits; they persist in an embedded sqlite store
keyed by id so a human loop can span restarts. Edits recompute the cheap
semantic gauge immediately; image similarity is only computed on explicit
regeneration.
"""

from __future__ import annotations

import json
import sqlite3
import threading
import time
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse
from pydantic import BaseModel

from .config import Config
from .embedding import EmbeddingBackend, cosine, embed_image, embed_text
from .genclient import GenerationBackend, GenerationRequest
from .images import ImageDecodeError, load_rgb, save_png
from .prompts import (
    ModifierCategory,
    ModifierVocabulary,
    ParsedPrompt,
    compose_prompt,
    normalize_modifier,
)
from .stealer import CaptionModel, ModifierClassifier, StealerConfig, steal_prompt

SCHEMA_VERSION = "1"


class SessionStore:
    """Embedded key-value store for sessions with a configurable TTL."""

    def __init__(self, db_path: str | Path, ttl_seconds: float = 86400.0):
        self._conn = sqlite3.connect(str(db_path), check_same_thread=False)
        self._lock = threading.Lock()
        self.ttl_seconds = ttl_seconds
        with self._lock:
            self._conn.execute(
                "CREATE TABLE IF NOT EXISTS sessions ("
                "id TEXT PRIMARY KEY, data TEXT NOT NULL, expires_at REAL NOT NULL)"
            )
            self._conn.commit()

    def put(self, session_id: str, data: dict) -> None:
        expires = time.time() + self.ttl_seconds
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO sessions (id, data, expires_at) VALUES (?, ?, ?)",
                (session_id, json.dumps(data), expires),
            )
            self._conn.commit()

    def get(self, session_id: str) -> dict | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT data, expires_at FROM sessions WHERE id = ?", (session_id,)
            ).fetchone()
            if row is None:
                return None
            data, expires_at = row
            if time.time() > expires_at:
                self._conn.execute("DELETE FROM sessions WHERE id = ?", (session_id,))
                self._conn.commit()
                return None
            return json.loads(data)


class PromptPatch(BaseModel):
    subject: str | None = None
    add: list[str] | None = None
    remove: list[str] | None = None


class GenerateBody(BaseModel):
    seeds: list[int]


def _session_payload(data: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "id": data["id"],
        "created_at": data["created_at"],
        "stolen_prompt": {
            "subject": data["subject"],
            "modifiers": [{"modifier": m, "posterior": p} for m, p in data["modifiers"]],
            "composed": _composed(data),
        },
        "metrics": data["metrics"],
        "history": data["history"],
    }


def _composed(data: dict) -> str:
    return compose_prompt(
        ParsedPrompt(subject=data["subject"], modifiers=tuple(m for m, _ in data["modifiers"]))
    )


def create_app(
    config: Config | None = None,
    *,
    caption_model: CaptionModel,
    classifier: ModifierClassifier,
    backend: EmbeddingBackend,
    genbackend: GenerationBackend,
    vocab: ModifierVocabulary,
    stealer_cfg: StealerConfig | None = None,
    workdir: str | Path | None = None,
) -> FastAPI:
    config = config or Config()
    stealer_cfg = stealer_cfg or StealerConfig()
    workdir = Path(workdir) if workdir else Path.cwd()
    image_dir = workdir / str(config.get("service.image_dir", "session_images"))
    image_dir.mkdir(parents=True, exist_ok=True)
    store = SessionStore(
        workdir / str(config.get("service.db_path", "sessions.db")),
        ttl_seconds=float(config.get("service.session_ttl_seconds", 86400.0)),
    )
    session_locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    app = FastAPI(title="prompt stealing console")
    # The browser console is served as static files from wherever; this is a
    # local research tool, not a multi-tenant service.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def lock_for(session_id: str) -> threading.Lock:
        with locks_guard:
            return session_locks.setdefault(session_id, threading.Lock())

    def load_session(session_id: str) -> dict:
        data = store.get(session_id)
        if data is None:
            raise HTTPException(status_code=404, detail="unknown or expired session")
        return data

    def semantic_vs_target(data: dict) -> float:
        # The adversary has only the target image, so the live gauge is the
        # prompt-to-image cosine in the joint embedding space.
        target = load_rgb(image_dir / data["target_image"])
        return float(cosine(embed_text(backend, _composed(data)), embed_image(backend, target)))

    @app.post("/sessions")
    async def create_session(image: UploadFile = File(...)):
        raw = await image.read()
        try:
            target = load_rgb(raw)
        except ImageDecodeError as exc:
            raise HTTPException(status_code=400, detail=f"undecodable image: {exc}")
        stolen = steal_prompt(caption_model, classifier, target, stealer_cfg)
        session_id = uuid.uuid4().hex
        session_dir = image_dir / session_id
        session_dir.mkdir(parents=True, exist_ok=True)
        save_png(target, session_dir / "target.png")
        data = {
            "id": session_id,
            "created_at": time.time(),
            "target_image": f"{session_id}/target.png",
            "subject": stolen.subject,
            "modifiers": [[m, p] for m, p in stolen.modifiers],
            "attack": stolen.attack.value,
            "metrics": {},
            "history": [],
        }
        data["metrics"] = {"semantic": semantic_vs_target(data), "image": None}
        data["history"].append(
            {
                "edit": "initial attack",
                "subject": data["subject"],
                "modifiers": [m for m, _ in data["modifiers"]],
                "prompt": _composed(data),
                "scores": data["metrics"],
                "images": [],
                "at": time.time(),
            }
        )
        store.put(session_id, data)
        return _session_payload(data)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_payload(load_session(session_id))

    @app.patch("/sessions/{session_id}/prompt")
    def update_prompt(session_id: str, patch: PromptPatch):
        with lock_for(session_id):
            data = load_session(session_id)
            edits: list[str] = []
            if patch.subject is not None:
                subject = " ".join(patch.subject.replace(",", " ").split())
                if not subject:
                    raise HTTPException(status_code=400, detail="subject must be non-empty")
                edits.append(f"subject -> {subject!r}")
                data["subject"] = subject
            present = {m for m, _ in data["modifiers"]}
            for raw in patch.add or []:
                m = normalize_modifier(raw)
                if not m:
                    raise HTTPException(status_code=400, detail=f"empty modifier: {raw!r}")
                if m in present:
                    edits.append(f"add {m!r} (already present, no-op)")
                    continue
                data["modifiers"].append([m, None])
                present.add(m)
                edits.append(f"add {m!r}")
            for raw in patch.remove or []:
                m = normalize_modifier(raw)
                if m not in present:
                    raise HTTPException(status_code=400, detail=f"modifier not present: {raw!r}")
                data["modifiers"] = [pair for pair in data["modifiers"] if pair[0] != m]
                present.discard(m)
                edits.append(f"remove {m!r}")
            if not edits:
                edits.append("no-op")
            data["metrics"] = {"semantic": semantic_vs_target(data), "image": data["metrics"].get("image")}
            data["history"].append(
                {
                    "edit": "; ".join(edits),
                    "subject": data["subject"],
                    "modifiers": [m for m, _ in data["modifiers"]],
                    "prompt": _composed(data),
                    "scores": data["metrics"],
                    "images": [],
                    "at": time.time(),
                }
            )
            store.put(session_id, data)
            return {
                "schema_version": SCHEMA_VERSION,
                "metrics": data["metrics"],
                "stolen_prompt": _session_payload(data)["stolen_prompt"],
            }

    @app.post("/sessions/{session_id}/generate")
    def regenerate(session_id: str, body: GenerateBody):
        with lock_for(session_id):
            data = load_session(session_id)
            prompt = _composed(data)
            target = load_rgb(image_dir / data["target_image"])
            v_target = embed_image(backend, target)
            session_dir = image_dir / session_id
            urls: list[str | None] = []
            errors: list[str | None] = []
            sims: list[float] = []
            stamp = len(data["history"])
            for seed in body.seeds:
                try:
                    req = GenerationRequest(
                        prompt=prompt,
                        seed=int(seed),
                        steps=int(config.get("genclient.steps", 50)),
                        width=int(config.get("genclient.width", 512)),
                        height=int(config.get("genclient.height", 512)),
                    )
                    img = genbackend.generate(req)
                    name = f"gen_{stamp:03d}_seed{seed}.png"
                    save_png(img, session_dir / name)
                    urls.append(f"/images/{session_id}/{name}")
                    errors.append(None)
                    sims.append(float(cosine(v_target, embed_image(backend, img))))
                except Exception as exc:
                    urls.append(None)
                    errors.append(f"{type(exc).__name__}: {exc}")
            image_similarity = float(np.mean(sims)) if sims else None
            data["metrics"] = {"semantic": data["metrics"].get("semantic"), "image": image_similarity}
            data["history"].append(
                {
                    "edit": f"regenerate seeds={list(body.seeds)}",
                    "subject": data["subject"],
                    "modifiers": [m for m, _ in data["modifiers"]],
                    "prompt": prompt,
                    "scores": data["metrics"],
                    "images": [u for u in urls if u],
                    "at": time.time(),
                }
            )
            store.put(session_id, data)
            return {
                "schema_version": SCHEMA_VERSION,
                "images": urls,
                "errors": errors,
                "image_similarity": image_similarity,
            }

    @app.get("/vocabulary")
    def vocabulary(category: str | None = None):
        if category is not None:
            try:
                wanted = ModifierCategory(category)
            except ValueError:
                raise HTTPException(status_code=400, detail=f"unknown category: {category!r}")
            entries = [m for m in vocab.labels if vocab.category(m) is wanted]
        else:
            entries = list(vocab.labels)
        return {
            "schema_version": SCHEMA_VERSION,
            "entries": [
                {
                    "modifier": m,
                    "count": vocab.entries[m].count,
                    "category": vocab.entries[m].category.value,
                }
                for m in entries
            ],
        }

    @app.get("/images/{session_id}/{name}")
    def image_file(session_id: str, name: str):
        path = (image_dir / session_id / name).resolve()
        if not str(path).startswith(str(image_dir.resolve())) or not path.exists():
            raise HTTPException(status_code=404, detail="image not found")
        return FileResponse(path, media_type="image/png")

    return app
