"""FastAPI application exposing the gateway wire contract.

Endpoints: POST /v1/embed, POST /v1/nli, POST /v1/fill_mask, GET /v1/health.
The service is stateless across requests; responses are deterministic for a
fixed backend and model versions (the health payload carries both, so
clients can fingerprint caches).
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .backends import CANONICAL_MASK, BackendUnavailable, ModelBackend, build_backend
from .config import Settings


class EmbedRequest(BaseModel):
    texts: list[str]


class EmbedResponse(BaseModel):
    vectors: list[list[float]]
    model: str
    truncated: int


class NLIPair(BaseModel):
    premise: str
    hypothesis: str


class NLIRequest(BaseModel):
    pairs: list[NLIPair]


class Judgment(BaseModel):
    contradicts: float
    neutral: float
    entails: float


class NLIResponse(BaseModel):
    judgments: list[Judgment]
    model: str


class FillMaskRequest(BaseModel):
    prompt: str
    k: int = Field(ge=0)


class ScoredToken(BaseModel):
    token: str
    score: float


class FillMaskResponse(BaseModel):
    candidates: list[ScoredToken]


class _BackendHolder:
    """Lazy backend container so /v1/health can report 'loading' first."""

    def __init__(self, settings: Settings):
        self.settings = settings
        self.backend: ModelBackend | None = None
        self.error: str | None = None

    def get(self) -> ModelBackend:
        if self.backend is None:
            try:
                self.backend = build_backend(self.settings)
            except BackendUnavailable as exc:
                self.error = str(exc)
                raise HTTPException(status_code=503, detail=str(exc)) from exc
        return self.backend

    @property
    def status(self) -> str:
        if self.error:
            return "error"
        return "ready" if self.backend is not None else "loading"


def create_app(settings: Settings | None = None) -> FastAPI:
    from . import __version__

    settings = settings or Settings.from_env()
    holder = _BackendHolder(settings)
    app = FastAPI(title="taxometer-sidecar", version=__version__)

    @app.exception_handler(RequestValidationError)
    async def malformed_body(_: Request, exc: RequestValidationError) -> JSONResponse:
        # The wire contract promises 400 for malformed bodies.
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def _run(fn, *args):
        try:
            return fn(*args)
        except HTTPException:
            raise
        except BackendUnavailable as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from exc

    @app.post("/v1/embed", response_model=EmbedResponse)
    def embed(request: EmbedRequest) -> EmbedResponse:
        if len(request.texts) > settings.max_batch:
            raise HTTPException(
                status_code=413,
                detail=f"batch of {len(request.texts)} exceeds ceiling {settings.max_batch}",
            )
        backend = holder.get()
        if not request.texts:
            return EmbedResponse(vectors=[], model=backend.model_names()["embed"], truncated=0)
        vectors, truncated = _run(backend.embed, request.texts)
        return EmbedResponse(
            vectors=[[float(x) for x in row] for row in vectors],
            model=backend.model_names()["embed"],
            truncated=truncated,
        )

    @app.post("/v1/nli", response_model=NLIResponse)
    def nli(request: NLIRequest) -> NLIResponse:
        if len(request.pairs) > settings.max_batch:
            raise HTTPException(
                status_code=413,
                detail=f"batch of {len(request.pairs)} exceeds ceiling {settings.max_batch}",
            )
        backend = holder.get()
        if not request.pairs:
            return NLIResponse(judgments=[], model=backend.model_names()["nli"])
        triples = _run(backend.nli, [(p.premise, p.hypothesis) for p in request.pairs])
        return NLIResponse(
            judgments=[Judgment(contradicts=c, neutral=n, entails=e) for c, n, e in triples],
            model=backend.model_names()["nli"],
        )

    @app.post("/v1/fill_mask", response_model=FillMaskResponse)
    def fill_mask(request: FillMaskRequest) -> FillMaskResponse:
        if request.prompt.count(CANONICAL_MASK) != 1:
            raise HTTPException(
                status_code=400,
                detail=f"prompt must contain exactly one {CANONICAL_MASK} slot",
            )
        backend = holder.get()
        if request.k == 0:
            return FillMaskResponse(candidates=[])
        candidates = _run(backend.fill_mask, request.prompt, request.k)
        return FillMaskResponse(
            candidates=[ScoredToken(token=c.token, score=c.score) for c in candidates]
        )

    @app.get("/v1/health")
    def health() -> dict:
        # Model names come from settings, not the loaded backend, so cache
        # fingerprints derived from this payload identify the models even
        # before the first inference request loads them.
        if settings.backend == "stub":
            models = {"embed": "stub-embed", "nli": "stub-nli", "fill_mask": "stub-fill-mask"}
        else:
            models = {
                "embed": settings.embed_model,
                "nli": settings.nli_model,
                "fill_mask": settings.fill_mask_model,
            }
        return {
            "status": holder.status,
            "models": models,
            "versions": {
                "taxometer-sidecar": __version__,
                "backend": settings.backend,
            },
        }

    return app
