"""The wire-protocol service: exactly the six /v1/* POST routes.

Every route conforms bit-exactly to the orchestrator's wire schema, and
every error (validation included) comes back as {"error": str} so clients
see one failure shape.
"""

from __future__ import annotations

from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import SidecarConfig
from .encoder import TextEncoder
from .fact import EntailmentScorer
from .generator import CharCausalLM
from .retrieval import Bm25Index, build_index
from .summarizer import SalienceSummarizer


class ModelLoadError(RuntimeError):
    """A named model component failed to load at startup."""

    def __init__(self, component: str, reason: str):
        super().__init__(f"failed to load {component}: {reason}")
        self.component = component


@dataclass
class ModelBundle:
    generator: CharCausalLM
    encoder: TextEncoder
    summarizer: SalienceSummarizer
    fact_scorer: EntailmentScorer
    index: Bm25Index


def load_models(config: SidecarConfig) -> ModelBundle:
    def load(component: str, model_id: str, expected: str, factory):
        if model_id != expected:
            raise ModelLoadError(
                component, f"unknown model id '{model_id}' (this build ships '{expected}')")
        try:
            return factory()
        except Exception as exc:  # torch/setup failures surface with the component name
            raise ModelLoadError(component, str(exc)) from exc

    generator = load("generation model", config.generation_model_id, "tiny:char-lm",
                     lambda: CharCausalLM(device=config.device))
    encoder = load("embedding model", config.embedding_model_id, "tiny:text-encoder",
                   lambda: TextEncoder(device=config.device))
    summarizer = load("summarizer model", config.summarizer_model_id, "tiny:extractive",
                      lambda: SalienceSummarizer(encoder))
    fact_scorer = load("fact model", config.fact_model_id, "tiny:entailment",
                       lambda: EntailmentScorer(encoder, device=config.device))
    try:
        index = build_index(config.corpus_path)
    except Exception as exc:
        raise ModelLoadError("retrieval index", str(exc)) from exc
    return ModelBundle(generator, encoder, summarizer, fact_scorer, index)


class GenerateRequest(BaseModel):
    prompt: str
    n: int = Field(ge=1)
    temperature: float = Field(ge=0.0)
    max_new_tokens: int = Field(ge=1)


class EmbedRequest(BaseModel):
    texts: list[str] = Field(min_length=1)


class SummarizeRequest(BaseModel):
    text: str


class FactScoreRequest(BaseModel):
    claim: str
    evidence: str


class RetrieveRequest(BaseModel):
    query: str
    k: int = Field(ge=1)


class CompleteRequest(BaseModel):
    prompt: str
    stop: list[str] | None = None


def create_app(config: SidecarConfig | None = None,
               models: ModelBundle | None = None) -> FastAPI:
    config = config or SidecarConfig()
    models = models or load_models(config)
    app = FastAPI(title="cook-sidecar", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors())})

    @app.exception_handler(Exception)
    async def internal_error(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.post("/v1/generate")
    def generate(request: GenerateRequest) -> dict:
        texts = models.generator.generate(
            request.prompt, request.n, request.temperature, request.max_new_tokens)
        return {"texts": texts}

    @app.post("/v1/embed")
    def embed(request: EmbedRequest) -> dict:
        return {"vectors": models.encoder.encode(request.texts)}

    @app.post("/v1/summarize")
    def summarize(request: SummarizeRequest) -> dict:
        return {"summary": models.summarizer.summarize(request.text)}

    @app.post("/v1/fact_score")
    def fact_score(request: FactScoreRequest) -> dict:
        return {"score": models.fact_scorer.score(request.claim, request.evidence)}

    @app.post("/v1/retrieve")
    def retrieve(request: RetrieveRequest) -> dict:
        documents = models.index.retrieve(request.query, request.k)
        return {"documents": [{"text": d.text, "source_id": d.source_id} for d in documents]}

    @app.post("/v1/complete")
    def complete(request: CompleteRequest) -> dict:
        text = models.generator.complete(
            request.prompt, request.stop,
            config.complete_temperature, config.complete_max_new_tokens)
        return {"text": text}

    return app


def serve(config: SidecarConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host="127.0.0.1", port=config.port, log_level="warning")
