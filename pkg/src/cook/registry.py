"""Knowledge-card registry: cards, pipeline configuration, provider endpoints.

The registry is a single declarative YAML document so that adding a card is a
one-line config edit. It is immutable after load; reloading produces a new
value and in-flight queries keep the old one. Card order in the file defines
every deterministic ordering downstream (tie-breaking, prompt listing).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError

# Endpoint ids with a fixed role in the pipeline. Cards may bind to any other
# endpoint; these five must exist in every registry. The two optional scorer
# ids let one endpoint check summaries and another check retrieved evidence.
ROLE_EMBEDDER = "embedder"
ROLE_SUMMARIZER = "summarizer"
ROLE_FACT_SCORER = "fact_scorer"
ROLE_RETRIEVER = "retriever"
ROLE_LLM = "llm"
ROLE_SUM_FACT_SCORER = "sum_fact_scorer"
ROLE_RETRIEVAL_FACT_SCORER = "retrieval_fact_scorer"
REQUIRED_ROLES = (ROLE_EMBEDDER, ROLE_SUMMARIZER, ROLE_FACT_SCORER, ROLE_RETRIEVER, ROLE_LLM)

DEFAULT_MAX_NEW_TOKENS = 256


@dataclass(frozen=True)
class GenParams:
    """Generation parameters a card uses when prompted for documents."""

    num_documents: int
    temperature: float
    max_new_tokens: int


@dataclass(frozen=True)
class KnowledgeCard:
    """Descriptor of one specialized LM.

    ``description`` is the natural-language domain label shown to the LLM
    when it selects an information source, so it must be non-empty.
    """

    id: str
    description: str
    provider_ref: str
    default_gen_params: GenParams


@dataclass(frozen=True)
class FilterToggles:
    relevance: bool = True
    pruning: bool = True
    factuality: bool = True


@dataclass(frozen=True)
class PipelineConfig:
    """Hyperparameters governing the knowledge stream.

    ``n1`` documents are generated per card, ``n2`` survive the relevance
    filter, ``n3`` survive the factuality filter and reach the LLM prompt.
    ``fact_top_k`` restricts factuality sampling to the highest-scoring
    documents and must exceed ``n3``.
    """

    n1: int = 3
    n2: int = 5
    n3: int = 3
    fact_top_k: int = 4
    retrieval_k: int = 5
    max_iterations: int = 1
    temperature: float = 0.1
    rng_seed: int = 0
    filters: FilterToggles = field(default_factory=FilterToggles)

    def validate(self, n_cards: int | None = None) -> None:
        for name in ("n1", "n2", "n3", "fact_top_k", "retrieval_k"):
            if getattr(self, name) < 1:
                raise ConfigError(f"pipeline.{name} must be a positive integer")
        if self.max_iterations < 0:
            raise ConfigError("pipeline.max_iterations must be nonnegative")
        if self.temperature < 0:
            raise ConfigError("pipeline.temperature must be nonnegative")
        if self.fact_top_k <= self.n3:
            raise ConfigError("pipeline.fact_top_k must exceed n3")
        all_on = self.filters.relevance and self.filters.pruning and self.filters.factuality
        if all_on:
            if self.n3 > self.n2:
                raise ConfigError("pipeline.n3 must not exceed n2 when all filters are enabled")
            if n_cards is not None and self.n2 > n_cards * self.n1:
                raise ConfigError(
                    "pipeline.n2 must not exceed n_cards * n1 when all filters are enabled"
                )


@dataclass(frozen=True)
class ProviderSpec:
    """One endpoint binding: either a live URL or a named in-process stub."""

    kind: str  # "http" | "stub"
    url: str | None = None
    timeout: float = 60.0
    stub: str | None = None
    options: tuple[tuple[str, str], ...] = ()  # extra stub args, e.g. script/corpus paths


@dataclass(frozen=True)
class Registry:
    """Validated registry document. Safe to share across concurrent queries."""

    cards: tuple[KnowledgeCard, ...]
    pipeline: PipelineConfig
    providers: dict[str, ProviderSpec]
    base_dir: Path = Path(".")

    def card_by_id(self, card_id: str) -> KnowledgeCard:
        for card in self.cards:
            if card.id == card_id:
                return card
        raise KeyError(card_id)


def list_card_descriptions(registry: Registry) -> list[tuple[str, str]]:
    """Return (id, description) pairs in registration order.

    This order is used verbatim when listing information sources to the LLM.
    """
    return [(card.id, card.description) for card in registry.cards]


def _require_keys(mapping: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = required - set(mapping)
    if missing:
        raise ConfigError(f"{where}: missing required field(s) {sorted(missing)}")


def _parse_provider_spec(endpoint_id: str, raw: object) -> ProviderSpec:
    where = f"providers.{endpoint_id}"
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping")
    if "url" in raw:
        _require_keys(raw, {"url", "timeout"}, {"url"}, where)
        timeout = float(raw.get("timeout", 60.0))
        if timeout <= 0:
            raise ConfigError(f"{where}.timeout must be positive")
        return ProviderSpec(kind="http", url=str(raw["url"]), timeout=timeout)
    if "stub" in raw:
        extra = {k: str(v) for k, v in raw.items() if k != "stub"}
        return ProviderSpec(kind="stub", stub=str(raw["stub"]), options=tuple(sorted(extra.items())))
    raise ConfigError(f"{where}: must define either 'url' or 'stub'")


def _parse_pipeline(raw: dict, overrides: dict | None) -> PipelineConfig:
    _require_keys(
        raw,
        {"n1", "n2", "n3", "fact_top_k", "retrieval_k", "max_iterations",
         "temperature", "rng_seed", "filters"},
        set(),
        "pipeline",
    )
    values = dict(raw)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    filters_raw = values.pop("filters", {})
    if not isinstance(filters_raw, dict):
        raise ConfigError("pipeline.filters: expected a mapping")
    _require_keys(filters_raw, {"relevance", "pruning", "factuality"}, set(), "pipeline.filters")
    toggles = FilterToggles(
        relevance=bool(filters_raw.get("relevance", True)),
        pruning=bool(filters_raw.get("pruning", True)),
        factuality=bool(filters_raw.get("factuality", True)),
    )
    defaults = PipelineConfig()
    try:
        n3 = int(values.get("n3", defaults.n3))
        return PipelineConfig(
            n1=int(values.get("n1", defaults.n1)),
            n2=int(values.get("n2", defaults.n2)),
            n3=n3,
            # Minimal value satisfying fact_top_k > n3 when the file omits it.
            fact_top_k=int(values.get("fact_top_k", n3 + 1)),
            retrieval_k=int(values.get("retrieval_k", defaults.retrieval_k)),
            max_iterations=int(values.get("max_iterations", defaults.max_iterations)),
            temperature=float(values.get("temperature", defaults.temperature)),
            rng_seed=int(values.get("rng_seed", defaults.rng_seed)),
            filters=toggles,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"pipeline: invalid value ({exc})") from exc


def _parse_card(raw: object, pipeline: PipelineConfig, index: int) -> KnowledgeCard:
    where = f"cards[{index}]"
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping")
    _require_keys(
        raw,
        {"id", "description", "provider", "num_documents", "temperature", "max_new_tokens"},
        {"id", "description", "provider"},
        where,
    )
    card_id = str(raw["id"]).strip()
    if not card_id:
        raise ConfigError(f"{where}: id must be non-empty")
    description = str(raw["description"]).strip()
    if not description:
        raise ConfigError(f"{where} ({card_id}): description must be non-empty")
    num_documents = int(raw.get("num_documents", pipeline.n1))
    if num_documents < 1:
        raise ConfigError(f"cards.{card_id}: num_documents must be >= 1")
    params = GenParams(
        num_documents=num_documents,
        temperature=float(raw.get("temperature", pipeline.temperature)),
        max_new_tokens=int(raw.get("max_new_tokens", DEFAULT_MAX_NEW_TOKENS)),
    )
    if params.temperature < 0:
        raise ConfigError(f"cards.{card_id}: temperature must be nonnegative")
    if params.max_new_tokens < 1:
        raise ConfigError(f"cards.{card_id}: max_new_tokens must be >= 1")
    return KnowledgeCard(
        id=card_id,
        description=description,
        provider_ref=str(raw["provider"]),
        default_gen_params=params,
    )


def load_registry_dict(doc: dict, *, overrides: dict | None = None,
                       base_dir: Path | None = None) -> Registry:
    """Validate an already-parsed registry document."""
    if not isinstance(doc, dict):
        raise ConfigError("registry document must be a mapping")
    _require_keys(doc, {"cards", "pipeline", "providers"}, {"cards", "providers"}, "registry")

    pipeline = _parse_pipeline(doc.get("pipeline") or {}, overrides)

    raw_cards = doc.get("cards")
    if not isinstance(raw_cards, list):
        raise ConfigError("cards: expected a list")
    cards = [_parse_card(raw, pipeline, i) for i, raw in enumerate(raw_cards)]
    seen: set[str] = set()
    for card in cards:
        if card.id in seen:
            raise ConfigError(f"duplicate card id '{card.id}'")
        seen.add(card.id)

    raw_providers = doc.get("providers")
    if not isinstance(raw_providers, dict):
        raise ConfigError("providers: expected a mapping")
    providers = {str(k): _parse_provider_spec(str(k), v) for k, v in raw_providers.items()}

    for card in cards:
        if card.provider_ref not in providers:
            raise ConfigError(
                f"cards.{card.id}: provider '{card.provider_ref}' is not defined under providers"
            )
    for role in REQUIRED_ROLES:
        if role not in providers:
            raise ConfigError(f"providers: missing required role endpoint '{role}'")

    pipeline.validate(n_cards=len(cards))
    return Registry(
        cards=tuple(cards),
        pipeline=pipeline,
        providers=providers,
        base_dir=base_dir or Path("."),
    )


def load_registry(path: str | Path, *, overrides: dict | None = None) -> Registry:
    """Load and validate a registry file.

    ``overrides`` replaces pipeline values before validation (CLI flags).
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"registry file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"registry file {path} failed to parse: {exc}") from exc
    if doc is None:
        raise ConfigError(f"registry file {path} is empty")
    return load_registry_dict(doc, overrides=overrides, base_dir=path.parent)


def registry_to_dict(registry: Registry) -> dict:
    """Inverse of loading: a plain document that parses to an equal registry."""
    cards = []
    for card in registry.cards:
        cards.append({
            "id": card.id,
            "description": card.description,
            "provider": card.provider_ref,
            "num_documents": card.default_gen_params.num_documents,
            "temperature": card.default_gen_params.temperature,
            "max_new_tokens": card.default_gen_params.max_new_tokens,
        })
    pipeline = registry.pipeline
    providers: dict[str, dict] = {}
    for endpoint_id, spec in registry.providers.items():
        if spec.kind == "http":
            entry: dict = {"url": spec.url}
            if spec.timeout != 60.0:
                entry["timeout"] = spec.timeout
        else:
            entry = {"stub": spec.stub}
            entry.update(dict(spec.options))
        providers[endpoint_id] = entry
    return {
        "cards": cards,
        "pipeline": {
            "n1": pipeline.n1,
            "n2": pipeline.n2,
            "n3": pipeline.n3,
            "fact_top_k": pipeline.fact_top_k,
            "retrieval_k": pipeline.retrieval_k,
            "max_iterations": pipeline.max_iterations,
            "temperature": pipeline.temperature,
            "rng_seed": pipeline.rng_seed,
            "filters": {
                "relevance": pipeline.filters.relevance,
                "pruning": pipeline.filters.pruning,
                "factuality": pipeline.filters.factuality,
            },
        },
        "providers": providers,
    }


def dump_registry(registry: Registry) -> str:
    return yaml.safe_dump(registry_to_dict(registry), sort_keys=False, allow_unicode=True)


def clone_with_pipeline(registry: Registry, pipeline: PipelineConfig) -> Registry:
    """New registry value with a replaced pipeline (revalidated)."""
    pipeline.validate(n_cards=len(registry.cards))
    return Registry(
        cards=registry.cards,
        pipeline=pipeline,
        providers=copy.copy(registry.providers),
        base_dir=registry.base_dir,
    )
