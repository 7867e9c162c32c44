from __future__ import annotations

from typing import Sequence

import pytest

from cook.providers import (
    BagOfCharsEmbedder,
    EmbeddingResponse,
    FactScoreResponse,
    FirstSentenceSummarizer,
    GenerationRequest,
    GenerationResponse,
    InMemoryRetriever,
    ProviderSet,
    RetrievalResponse,
    TokenOverlapScorer,
)
from cook.registry import (
    FilterToggles,
    GenParams,
    KnowledgeCard,
    PipelineConfig,
    Registry,
)


class TableEmbedder:
    """Embedder with a fixed text -> vector table (test double)."""

    def __init__(self, table: dict[str, Sequence[float]], endpoint_id: str = "fake-embed"):
        self.endpoint_id = endpoint_id
        self.table = {k: tuple(float(x) for x in v) for k, v in table.items()}

    def embed(self, texts: Sequence[str]) -> EmbeddingResponse:
        return EmbeddingResponse(tuple(self.table[t] for t in texts))


class ConstGenerator:
    """Always generates the same text (n copies per request)."""

    def __init__(self, text: str, endpoint_id: str = "fake-gen"):
        self.endpoint_id = endpoint_id
        self.text = text

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        return GenerationResponse(tuple(self.text for _ in range(request.n)))


class FnLlm:
    """LLM driven by a plain function of the prompt (test double)."""

    def __init__(self, fn, endpoint_id: str = "fake-llm"):
        self.endpoint_id = endpoint_id
        self.fn = fn

    def complete(self, prompt: str, stop: Sequence[str] | None = None) -> str:
        return self.fn(prompt)


class TableScorer:
    """Fact scorer keyed on the evidence text; default for unknown pairs."""

    def __init__(self, by_evidence: dict[str, float], default: float = 0.0,
                 endpoint_id: str = "fake-fact"):
        self.endpoint_id = endpoint_id
        self.by_evidence = dict(by_evidence)
        self.default = default

    def fact_score(self, claim: str, evidence: str) -> FactScoreResponse:
        return FactScoreResponse(self.by_evidence.get(evidence, self.default))


class FixedRetriever:
    """Returns the same documents for every query."""

    def __init__(self, documents=(), endpoint_id: str = "fake-retrieve"):
        self.endpoint_id = endpoint_id
        self.documents = tuple(documents)

    def retrieve(self, query: str, k: int) -> RetrievalResponse:
        return RetrievalResponse(self.documents[:k])


class CallCounter:
    """Wraps a provider and counts invocations per method."""

    def __init__(self, inner):
        self._inner = inner
        self.endpoint_id = inner.endpoint_id
        self.calls: dict[str, int] = {}

    def _count(self, name: str):
        self.calls[name] = self.calls.get(name, 0) + 1

    def __getattr__(self, name):
        attr = getattr(self._inner, name)
        if not callable(attr):
            return attr

        def wrapper(*args, **kwargs):
            self._count(name)
            return attr(*args, **kwargs)

        return wrapper


def make_card(card_id: str, description: str | None = None, provider: str | None = None,
              n: int = 1, temperature: float = 0.0, max_new_tokens: int = 64) -> KnowledgeCard:
    return KnowledgeCard(
        id=card_id,
        description=description or card_id,
        provider_ref=provider or f"{card_id}-lm",
        default_gen_params=GenParams(
            num_documents=n, temperature=temperature, max_new_tokens=max_new_tokens,
        ),
    )


def make_config(**kwargs) -> PipelineConfig:
    filters = kwargs.pop("filters", None)
    if isinstance(filters, dict):
        filters = FilterToggles(**filters)
    if filters is not None:
        kwargs["filters"] = filters
    return PipelineConfig(**kwargs)


def make_registry(cards: Sequence[KnowledgeCard], config: PipelineConfig | None = None) -> Registry:
    return Registry(cards=tuple(cards), pipeline=config or PipelineConfig(), providers={})


def make_provider_set(
    *,
    generators: dict[str, object] | None = None,
    embedder=None,
    summarizer=None,
    fact_scorer=None,
    sum_fact_scorer=None,
    retrieval_fact_scorer=None,
    retriever=None,
    llm=None,
) -> ProviderSet:
    fact = fact_scorer or TokenOverlapScorer()
    return ProviderSet(
        embedder=embedder or BagOfCharsEmbedder(),
        summarizer=summarizer or FirstSentenceSummarizer(),
        sum_fact_scorer=sum_fact_scorer or fact,
        retrieval_fact_scorer=retrieval_fact_scorer or fact,
        retriever=retriever or InMemoryRetriever(),
        llm=llm or FnLlm(lambda prompt: ""),
        generators=dict(generators or {}),
    )


class MarkerGenerator:
    """Emits a secret token for records assigned to this card (test double)."""

    def __init__(self, card_id: str, assigned_card: dict[str, str], part: str | None = None):
        self.endpoint_id = f"{card_id}-gen"
        self.card_id = card_id
        self.assigned_card = assigned_card
        self.part = part  # None: whole token; else one named fragment

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        item = item_id_from(request.prompt)
        if self.part is not None:
            text = f"Fragment {self.part} of item {item} is PART-{item}-{self.part}."
        elif self.assigned_card.get(item) == self.card_id:
            text = f"The secret token for item {item} is TOKEN-{item}."
        else:
            text = "No relevant information found here."
        return GenerationResponse(tuple(text for _ in range(request.n)))


def item_id_from(text: str) -> str:
    import re

    match = re.search(r"item (\w+)", text)
    if not match:
        raise AssertionError(f"no item id in prompt: {text!r}")
    return match.group(1)


def make_marker_world(n_records: int = 10):
    """Forced-outcome setup: per record, exactly one card emits the token the
    scripted LLM needs in its Knowledge block to answer correctly."""
    from cook.evaluation import EvalRecord

    card_ids = ("alpha", "beta")
    records = []
    assigned_card: dict[str, str] = {}
    for i in range(n_records):
        item = f"{i:02d}"
        assigned_card[item] = card_ids[i % len(card_ids)]
        records.append(EvalRecord(
            id=f"r{item}",
            question=f"What is the secret token for item {item}?",
            gold=f"TOKEN-{item}",
        ))

    def llm_fn(prompt: str) -> str:
        from cook.integration import PROMPT_NEED_INFO, PROMPT_WHAT_KIND

        item = item_id_from(prompt)
        if prompt.endswith(PROMPT_NEED_INFO):
            return "No" if f"TOKEN-{item}" in prompt else "Yes"
        if prompt.endswith(PROMPT_WHAT_KIND):
            return f"{assigned_card[item]} domain"
        return f"TOKEN-{item}" if f"TOKEN-{item}" in prompt else "I do not know"

    registry = make_registry(
        [make_card(card_id, f"{card_id} domain", provider=f"{card_id}-lm", n=1)
         for card_id in card_ids],
        make_config(n1=1, n2=2, n3=2, fact_top_k=3, rng_seed=1234),
    )
    providers = make_provider_set(
        generators={f"{card_id}-lm": MarkerGenerator(card_id, assigned_card)
                    for card_id in card_ids},
        llm=FnLlm(llm_fn),
    )
    return registry, providers, records


def make_split_marker_world(n_records: int = 10, *, n3: int = 3, fact_top_k: int = 4,
                            required_parts: tuple[str, ...] = ("A", "B", "C")):
    """Sweep setup: the token is split in fragments across three cards, and
    the scripted LLM answers correctly only when every required fragment is
    present in the Knowledge block."""
    from cook.evaluation import EvalRecord

    parts = ("A", "B", "C")
    records = [
        EvalRecord(
            id=f"r{i:02d}",
            question=f"What is the secret token for item {i:02d}?",
            gold=f"TOKEN-{i:02d}",
        )
        for i in range(n_records)
    ]

    def llm_fn(prompt: str) -> str:
        item = item_id_from(prompt)
        if all(f"PART-{item}-{part}" in prompt for part in required_parts):
            return f"TOKEN-{item}"
        return "I do not know"

    registry = make_registry(
        [make_card(f"card-{part}", f"fragment {part} source",
                   provider=f"{part}-lm", n=1) for part in parts],
        make_config(n1=1, n2=3, n3=n3, fact_top_k=fact_top_k, rng_seed=1234),
    )
    providers = make_provider_set(
        generators={f"{part}-lm": MarkerGenerator(f"card-{part}", {}, part=part)
                    for part in parts},
        llm=FnLlm(llm_fn),
    )
    return registry, providers, records


@pytest.fixture
def registry_doc() -> dict:
    """A minimal valid registry document (two cards, all-stub providers)."""
    return {
        "cards": [
            {"id": "sports", "description": "sports", "provider": "sports-lm"},
            {"id": "biomed", "description": "biomedical literature", "provider": "biomed-lm"},
        ],
        "pipeline": {},
        "providers": {
            "sports-lm": {"stub": "echo"},
            "biomed-lm": {"stub": "echo"},
            "embedder": {"stub": "bag-of-chars"},
            "summarizer": {"stub": "first-sentence"},
            "fact_scorer": {"stub": "token-overlap"},
            "retriever": {"stub": "memory-retriever"},
            "llm": {"stub": "scripted"},
        },
    }
