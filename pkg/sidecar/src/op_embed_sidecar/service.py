"""The embedding wire protocol: ``POST /embed`` with ``{"texts": [...]}``
returning ``{"vectors": [[...]], "dim": int}``.

Requests arriving before the model has loaded get 503; empty or invalid
text lists get 400.  Batches are chunked internally to ``max_batch``.
"""

from __future__ import annotations

from contextlib import asynccontextmanager
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from op_embed_sidecar.encoders import DEFAULT_MODEL, build_encoder


@dataclass(frozen=True)
class SidecarConfig:
    model_identifier: str = DEFAULT_MODEL
    backend: str = "sbert"  # "sbert" | "hash"
    device: str = "cpu"
    max_batch: int = 32
    normalize: bool = True
    hash_dim: int = 384

    def __post_init__(self):
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")


class EmbedRequest(BaseModel):
    texts: list[str]


def create_app(cfg: SidecarConfig, encoder=None) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if app.state.encoder is None:
            app.state.encoder = build_encoder(
                cfg.backend, cfg.model_identifier, cfg.device, cfg.hash_dim
            )
        yield

    app = FastAPI(title="op-embed-sidecar", lifespan=lifespan)
    app.state.encoder = encoder
    app.state.cfg = cfg

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "model_loaded": app.state.encoder is not None}

    @app.post("/embed")
    def embed(request: EmbedRequest):
        if app.state.encoder is None:
            return JSONResponse(status_code=503, content={"error": "model is still loading"})
        if not request.texts:
            return JSONResponse(status_code=400, content={"error": "texts must be non-empty"})
        if any(not t for t in request.texts):
            return JSONResponse(status_code=400, content={"error": "texts must be non-empty strings"})

        chunks = []
        for start in range(0, len(request.texts), cfg.max_batch):
            chunks.append(app.state.encoder.encode(request.texts[start:start + cfg.max_batch]))
        vectors = np.vstack(chunks)
        if cfg.normalize:
            norms = np.linalg.norm(vectors, axis=1, keepdims=True)
            vectors = vectors / norms
        return {"vectors": vectors.tolist(), "dim": int(vectors.shape[1])}

    return app
