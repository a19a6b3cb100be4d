"""HTTP scoring service for training-loop integration.

Stateless: each request is scored independently against the configured
embedding provider, and identical requests produce identical responses for a
fixed provider state.  Schema violations come back as 400 with field-level
messages, empty reference sets as 422, and provider failures as 502.
"""

from __future__ import annotations

import json
import os
from typing import Any

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

import opreward
from opreward import serialize
from opreward.embeddings import EmbeddingError, EmbeddingProvider, SimilarityMatrix
from opreward.grpo import group_advantages
from opreward.matching import MATCH_BACKEND, mbgm
from opreward.pipeline import Perspective, PerspectiveSet
from opreward.rewards import RewardConfig, merge_config, score_response


class ReferenceModel(BaseModel):
    name: str
    explanation: str


class ScoreRequestModel(BaseModel):
    prompt: str
    references: list[ReferenceModel]
    responses: list[str] = Field(min_length=1)
    config_overrides: dict[str, Any] = Field(default_factory=dict)
    want_advantages: bool = False


class MatchRequestModel(BaseModel):
    matrix: list[list[float]] = Field(min_length=1)
    tau: float


def _json(payload: dict, status_code: int = 200) -> Response:
    return Response(content=serialize.dumps(payload), media_type="application/json",
                    status_code=status_code)


def create_app(provider: EmbeddingProvider, config: RewardConfig | None = None) -> FastAPI:
    base_config = config if config is not None else RewardConfig()
    app = FastAPI(title="opreward", version=opreward.__version__)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        details = [
            {"field": ".".join(str(part) for part in err["loc"]), "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"error": "invalid request", "details": details})

    @app.get("/healthz")
    def healthz():
        return _json({"status": "ok"})

    @app.get("/version")
    def version():
        return _json({"version": opreward.__version__, "matching_backend": MATCH_BACKEND})

    @app.post("/score")
    def score(request: ScoreRequestModel):
        if not request.references:
            return JSONResponse(status_code=422, content={"error": "references must be non-empty"})
        try:
            cfg = merge_config(base_config, request.config_overrides)
        except ValueError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        references = PerspectiveSet(
            row_id="request",
            prompt=request.prompt,
            perspectives=tuple(Perspective(r.name, r.explanation) for r in request.references),
        )
        try:
            breakdowns = [
                score_response(request.prompt, references, raw, cfg, provider)
                for raw in request.responses
            ]
        except EmbeddingError as exc:
            return JSONResponse(status_code=502, content={"error": str(exc)})
        advantages = group_advantages([b.final for b in breakdowns]) if request.want_advantages else None
        return _json(serialize.score_payload(breakdowns, advantages, cfg, opreward.__version__))

    @app.post("/match")
    def match(request: MatchRequestModel):
        widths = {len(row) for row in request.matrix}
        if len(widths) != 1 or 0 in widths:
            return JSONResponse(status_code=400, content={"error": "matrix must be rectangular and non-empty"})
        n_rows = len(request.matrix)
        n_cols = widths.pop()
        try:
            matrix = SimilarityMatrix(request.matrix, tuple(range(n_rows)), tuple(range(n_cols)))
            result = mbgm(matrix, request.tau)
        except ValueError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        return _json(serialize.match_result_dict(result))

    return app


def create_app_from_env() -> FastAPI:
    """App factory for multi-worker serving: each process rebuilds the
    provider and config from OPREWARD_STORE / OPREWARD_EMBED_URL (or
    OP_EMBED_URL) and the optional OPREWARD_CONFIG JSON blob."""
    from opreward.embeddings import HttpEmbeddingProvider, LocalVectorStore

    store_path = os.environ.get("OPREWARD_STORE")
    embed_url = os.environ.get("OPREWARD_EMBED_URL") or os.environ.get("OP_EMBED_URL")
    if store_path:
        provider = LocalVectorStore.from_jsonl(store_path)
    elif embed_url:
        provider = HttpEmbeddingProvider(embed_url)
    else:
        raise RuntimeError("set OPREWARD_STORE or OPREWARD_EMBED_URL / OP_EMBED_URL")
    overrides = os.environ.get("OPREWARD_CONFIG")
    config = merge_config(RewardConfig(), json.loads(overrides)) if overrides else RewardConfig()
    return create_app(provider, config)
