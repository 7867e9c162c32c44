"""Provider capability types and the checked operation layer.

Six capabilities cross the provider boundary: document generation, text
embedding, summarization, fact scoring, evidence retrieval, and black-box
LLM completion. The module-level operations below are the single entry
point the rest of the package uses; they enforce the type invariants so
that no invalid value crosses from a provider (stub or wire) into the core.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from ..errors import ContractError, ProtocolError


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    n: int = 1
    temperature: float = 0.0
    max_new_tokens: int = 256

    def validate(self) -> None:
        if self.n < 1:
            raise ContractError("generation request: n must be >= 1")
        if self.temperature < 0:
            raise ContractError("generation request: temperature must be nonnegative")
        if self.max_new_tokens < 1:
            raise ContractError("generation request: max_new_tokens must be >= 1")


@dataclass(frozen=True)
class GenerationResponse:
    texts: tuple[str, ...]


@dataclass(frozen=True)
class EmbeddingResponse:
    vectors: tuple[tuple[float, ...], ...]

    @property
    def dimension(self) -> int:
        return len(self.vectors[0]) if self.vectors else 0


@dataclass(frozen=True)
class FactScoreResponse:
    score: float


@dataclass(frozen=True)
class RetrievedDocument:
    text: str
    source_id: str


@dataclass(frozen=True)
class RetrievalResponse:
    documents: tuple[RetrievedDocument, ...]


@dataclass
class LlmTurn:
    """One prompt/response exchange with the black-box LLM."""

    prompt: str
    response: str
    latency: float
    provider_id: str


@dataclass
class Transcript:
    """Ordered record of every LLM turn within one query (audit trail)."""

    turns: list[LlmTurn] = field(default_factory=list)

    def append(self, turn: LlmTurn) -> None:
        self.turns.append(turn)

    def __len__(self) -> int:
        return len(self.turns)


class GenerationProvider(Protocol):
    endpoint_id: str

    def generate(self, request: GenerationRequest) -> GenerationResponse: ...


class EmbeddingProvider(Protocol):
    endpoint_id: str

    def embed(self, texts: Sequence[str]) -> EmbeddingResponse: ...


class SummarizationProvider(Protocol):
    endpoint_id: str

    def summarize(self, text: str) -> str: ...


class FactScoringProvider(Protocol):
    endpoint_id: str

    def fact_score(self, claim: str, evidence: str) -> FactScoreResponse: ...


class RetrievalProvider(Protocol):
    endpoint_id: str

    def retrieve(self, query: str, k: int) -> RetrievalResponse: ...


class LlmProvider(Protocol):
    endpoint_id: str

    def complete(self, prompt: str, stop: Sequence[str] | None = None) -> str: ...


def generate(provider: GenerationProvider, request: GenerationRequest) -> GenerationResponse:
    """Generate ``request.n`` knowledge documents from one specialized LM."""
    request.validate()
    response = provider.generate(request)
    if len(response.texts) != request.n:
        raise ProtocolError(
            provider.endpoint_id,
            f"generate returned {len(response.texts)} texts, expected {request.n}",
        )
    return response


def embed(provider: EmbeddingProvider, texts: Sequence[str]) -> EmbeddingResponse:
    """Map each text to a feature vector; all vectors share one dimension."""
    if not texts:
        raise ContractError("embed: texts must be a non-empty list")
    response = provider.embed(list(texts))
    if len(response.vectors) != len(texts):
        raise ProtocolError(
            provider.endpoint_id,
            f"embed returned {len(response.vectors)} vectors for {len(texts)} texts",
        )
    dims = {len(v) for v in response.vectors}
    if len(dims) != 1 or 0 in dims:
        raise ProtocolError(provider.endpoint_id, f"embed returned inconsistent dimensions {dims}")
    return response


def summarize(provider: SummarizationProvider, text: str) -> str:
    if not text:
        raise ContractError("summarize: text must be non-empty")
    summary = provider.summarize(text)
    if not isinstance(summary, str):
        raise ProtocolError(provider.endpoint_id, "summarize returned a non-string summary")
    return summary


def fact_score(provider: FactScoringProvider, claim: str, evidence: str) -> FactScoreResponse:
    if not claim:
        raise ContractError("fact_score: claim must be non-empty")
    response = provider.fact_score(claim, evidence)
    if not 0.0 <= response.score <= 1.0:
        raise ProtocolError(provider.endpoint_id, f"fact score {response.score} outside [0, 1]")
    return response


def retrieve(provider: RetrievalProvider, query: str, k: int) -> RetrievalResponse:
    if k < 1:
        raise ContractError("retrieve: k must be >= 1")
    response = provider.retrieve(query, k)
    if len(response.documents) > k:
        raise ProtocolError(
            provider.endpoint_id,
            f"retrieve returned {len(response.documents)} documents, requested at most {k}",
        )
    return response


def llm_complete(
    provider: LlmProvider,
    prompt: str,
    transcript: Transcript | None = None,
    stop: Sequence[str] | None = None,
) -> str:
    """One completion call against the black-box LLM, recorded as a turn."""
    if not prompt:
        raise ContractError("llm_complete: prompt must be non-empty")
    started = time.monotonic()
    response = provider.complete(prompt, stop=stop)
    if not isinstance(response, str):
        raise ProtocolError(provider.endpoint_id, "complete returned a non-string response")
    if transcript is not None:
        transcript.append(LlmTurn(
            prompt=prompt,
            response=response,
            latency=time.monotonic() - started,
            provider_id=provider.endpoint_id,
        ))
    return response
