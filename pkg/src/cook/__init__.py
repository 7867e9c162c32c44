"""CooK: empower a black-box LLM with modular, collaboratively sourced
knowledge cards — small specialized LMs whose generated documents are
filtered for relevance, brevity, and factuality before reaching the LLM."""

from .errors import (
    ConfigError,
    ContractError,
    CookError,
    DatasetError,
    ProtocolError,
    ProviderError,
    RateLimitError,
    TransportError,
)
from .evaluation import (
    DatasetFormat,
    EngineKind,
    EvalRecord,
    EvalReport,
    balanced_accuracy,
    exact_match,
    load_dataset,
    macro_f1,
    run_eval,
    token_f1,
)
from .filters import (
    KnowledgeDocument,
    aggregate_factuality,
    factuality_sample,
    pruning_filter,
    relevance_filter,
    score_retrieval_factuality,
    score_summarization_factuality,
)
from .integration import (
    IntegrationResult,
    QueryTask,
    SelectionStrategy,
    assemble_prompt,
    parse_yes_no,
    run_bottom_up,
    run_top_down,
    run_vanilla,
    select_card_auto,
    select_card_explicit,
)
from .providers import ProviderSet, build_provider_set
from .registry import (
    KnowledgeCard,
    PipelineConfig,
    Registry,
    dump_registry,
    list_card_descriptions,
    load_registry,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ContractError", "CookError", "DatasetError", "ProtocolError",
    "ProviderError", "RateLimitError", "TransportError",
    "DatasetFormat", "EngineKind", "EvalRecord", "EvalReport",
    "balanced_accuracy", "exact_match", "load_dataset", "macro_f1", "run_eval", "token_f1",
    "KnowledgeDocument", "aggregate_factuality", "factuality_sample", "pruning_filter",
    "relevance_filter", "score_retrieval_factuality", "score_summarization_factuality",
    "IntegrationResult", "QueryTask", "SelectionStrategy", "assemble_prompt", "parse_yes_no",
    "run_bottom_up", "run_top_down", "run_vanilla", "select_card_auto", "select_card_explicit",
    "ProviderSet", "build_provider_set",
    "KnowledgeCard", "PipelineConfig", "Registry", "dump_registry",
    "list_card_descriptions", "load_registry",
    "__version__",
]
