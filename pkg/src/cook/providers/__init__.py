"""Provider layer: capability types, checked operations, stubs, wire clients."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError
from ..registry import (
    REQUIRED_ROLES,
    ROLE_EMBEDDER,
    ROLE_FACT_SCORER,
    ROLE_LLM,
    ROLE_RETRIEVAL_FACT_SCORER,
    ROLE_RETRIEVER,
    ROLE_SUM_FACT_SCORER,
    ROLE_SUMMARIZER,
    ProviderSpec,
    Registry,
)
from .base import (
    EmbeddingProvider,
    EmbeddingResponse,
    FactScoreResponse,
    FactScoringProvider,
    GenerationProvider,
    GenerationRequest,
    GenerationResponse,
    LlmProvider,
    LlmTurn,
    RetrievalProvider,
    RetrievalResponse,
    RetrievedDocument,
    SummarizationProvider,
    Transcript,
    embed,
    fact_score,
    generate,
    llm_complete,
    retrieve,
    summarize,
)
from .http import HttpProvider
from .stubs import (
    BagOfCharsEmbedder,
    EchoGenerator,
    FirstSentenceSummarizer,
    InMemoryRetriever,
    ScriptedLlm,
    TokenOverlapScorer,
    build_stub,
)

__all__ = [
    "EmbeddingProvider", "EmbeddingResponse", "FactScoreResponse", "FactScoringProvider",
    "GenerationProvider", "GenerationRequest", "GenerationResponse", "LlmProvider", "LlmTurn",
    "RetrievalProvider", "RetrievalResponse", "RetrievedDocument", "SummarizationProvider",
    "Transcript", "embed", "fact_score", "generate", "llm_complete", "retrieve", "summarize",
    "HttpProvider", "BagOfCharsEmbedder", "EchoGenerator", "FirstSentenceSummarizer",
    "InMemoryRetriever", "ScriptedLlm", "TokenOverlapScorer",
    "ProviderSet", "build_provider", "build_provider_set",
]


def build_provider(endpoint_id: str, spec: ProviderSpec, base_dir: Path):
    if spec.kind == "http":
        assert spec.url is not None
        return HttpProvider(endpoint_id, spec.url, timeout=spec.timeout)
    if spec.kind == "stub":
        assert spec.stub is not None
        return build_stub(spec.stub, endpoint_id, dict(spec.options), base_dir)
    raise ConfigError(f"providers.{endpoint_id}: unknown kind '{spec.kind}'")


@dataclass
class ProviderSet:
    """Resolved providers for one registry: role endpoints plus card generators.

    Instances are stateless from the caller's view and safe to share across
    concurrent queries.
    """

    embedder: EmbeddingProvider
    summarizer: SummarizationProvider
    sum_fact_scorer: FactScoringProvider
    retrieval_fact_scorer: FactScoringProvider
    retriever: RetrievalProvider
    llm: LlmProvider
    generators: dict[str, GenerationProvider] = field(default_factory=dict)

    def generator_for(self, provider_ref: str) -> GenerationProvider:
        try:
            return self.generators[provider_ref]
        except KeyError:
            raise ConfigError(f"no generation provider bound for endpoint '{provider_ref}'")


def build_provider_set(registry: Registry) -> ProviderSet:
    """Instantiate every endpoint named by the registry, one object per id."""
    instances = {
        endpoint_id: build_provider(endpoint_id, spec, registry.base_dir)
        for endpoint_id, spec in registry.providers.items()
    }
    for role in REQUIRED_ROLES:
        if role not in instances:
            raise ConfigError(f"providers: missing required role endpoint '{role}'")
    fact = instances[ROLE_FACT_SCORER]
    generators = {card.provider_ref: instances[card.provider_ref] for card in registry.cards}
    return ProviderSet(
        embedder=instances[ROLE_EMBEDDER],
        summarizer=instances[ROLE_SUMMARIZER],
        sum_fact_scorer=instances.get(ROLE_SUM_FACT_SCORER, fact),
        retrieval_fact_scorer=instances.get(ROLE_RETRIEVAL_FACT_SCORER, fact),
        retriever=instances[ROLE_RETRIEVER],
        llm=instances[ROLE_LLM],
        generators=generators,
    )
