"""Knowledge integration: the bottom-up and top-down query state machines.

Bottom-up activates every card at once, pushes the generated documents
through the three filters, and makes a single LLM call with the surviving
knowledge concatenated ahead of the question. Top-down instead puts the LLM
in charge: it is asked whether it needs more information, and on "Yes" one
card is selected (by embedding match against the card descriptions, or by
the LLM naming a source explicitly), prompted for documents, and the most
factual document is appended to the context; the loop repeats until the LLM
declines or the iteration budget is spent.
"""

from __future__ import annotations

import concurrent.futures
import enum
import logging
import re
from dataclasses import dataclass, field
from random import Random
from typing import Sequence

from .errors import ContractError
from .filters import (
    KnowledgeDocument,
    cosine_similarity,
    factuality_sample,
    pruning_filter,
    relevance_filter,
    score_factuality,
)
from .providers import (
    GenerationRequest,
    ProviderSet,
    Transcript,
    embed,
    generate,
    llm_complete,
)
from .registry import KnowledgeCard, PipelineConfig, Registry, list_card_descriptions

log = logging.getLogger(__name__)

PROMPT_NEED_INFO = "Do you need more information? (Yes or No)"
PROMPT_WHAT_KIND = "What kind of information do you need?"
PROMPT_CHOOSE_SOURCE = "Choose an information source from the following:"
KNOWLEDGE_PREFIX = "Knowledge:"
QUESTION_PREFIX = "Question:"
ANSWER_PREFIX = "Answer:"


class SelectionStrategy(enum.Enum):
    AUTO = "auto"
    EXP = "exp"


class YesNo(enum.Enum):
    YES = "yes"
    NO = "no"


@dataclass(frozen=True)
class QueryTask:
    """One question for the pipeline, plus everything needed to prompt it."""

    question: str
    icl_prefix: str = ""
    choices: tuple[str, ...] | None = None
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.question:
            raise ContractError("QueryTask: question must be non-empty")
        if self.choices is not None and len(self.choices) < 2:
            raise ContractError("QueryTask: multiple choice needs at least 2 choices")

    @property
    def is_multiple_choice(self) -> bool:
        return self.choices is not None


@dataclass
class QueryTelemetry:
    """Per-query counters merged into the evaluation report."""

    selected_cards: list[str] = field(default_factory=list)
    factuality_scores: list[tuple[str, float]] = field(default_factory=list)
    ambiguous_yes_no: int = 0
    explicit_fallbacks: int = 0
    first_gate: str | None = None


@dataclass
class IntegrationResult:
    answer: str
    raw_response: str
    transcript: Transcript
    knowledge_used: list[KnowledgeDocument]
    iterations: int
    abstain_path: bool
    telemetry: QueryTelemetry


def assemble_prompt(segments: Sequence[str]) -> str:
    """Join non-empty segments with single newlines, no trailing whitespace."""
    parts = [segment.rstrip() for segment in segments if segment and segment.strip()]
    if not parts:
        raise ContractError("assemble_prompt: segments must be non-empty")
    return "\n".join(parts)


def format_knowledge_block(docs: Sequence[KnowledgeDocument]) -> str:
    """Render the knowledge line; empty input omits the block entirely."""
    texts = [doc.text_for_prompt for doc in docs]
    if not texts:
        return ""
    return f"{KNOWLEDGE_PREFIX} " + " ".join(texts)


def parse_yes_no(response: str) -> tuple[YesNo, bool]:
    """Classify the first word token; anything ambiguous counts as No."""
    match = re.search(r"[A-Za-z]+", response)
    token = match.group(0).lower() if match else ""
    if token == "yes":
        return YesNo.YES, False
    if token == "no":
        return YesNo.NO, False
    return YesNo.NO, True


def extract_answer(task: QueryTask, response: str) -> str:
    """Pull the graded answer out of the raw LLM response.

    Multiple choice: first standalone choice letter. Free text: everything
    up to the first stop sequence. Isolated here so alternative extraction
    rules can be swapped in without touching the engines.
    """
    if task.is_multiple_choice:
        letters = [chr(ord("A") + i) for i in range(len(task.choices or ()))]
        match = re.search(r"\b(" + "|".join(letters) + r")\b", response, re.IGNORECASE)
        return match.group(1).upper() if match else ""
    text = response
    for stop in task.stop_sequences:
        cut = text.find(stop)
        if cut != -1:
            text = text[:cut]
    return text.strip()


def select_card_auto(
    need_response: str,
    registry: Registry,
    embedder,
) -> KnowledgeCard:
    """Pick the card whose description best matches what the LLM asked for."""
    if not registry.cards:
        raise ContractError("select_card_auto: registry has no cards")
    if len(registry.cards) == 1:
        return registry.cards[0]
    response = embed(embedder, [need_response] + [card.description for card in registry.cards])
    target = response.vectors[0]
    best_index = 0
    best_sim = -float("inf")
    for index, vector in enumerate(response.vectors[1:]):
        sim = cosine_similarity(vector, target)
        if sim > best_sim:
            best_sim = sim
            best_index = index
    return registry.cards[best_index]


def select_card_explicit(
    choice_response: str,
    registry: Registry,
    embedder,
) -> tuple[KnowledgeCard, bool]:
    """Match the LLM's named source; fall back to auto selection on a miss.

    Returns the card and whether the fallback fired (counted in telemetry).
    """
    if not registry.cards:
        raise ContractError("select_card_explicit: registry has no cards")
    wanted = choice_response.strip().casefold()
    for card in registry.cards:
        if card.description.strip().casefold() == wanted:
            return card, False
    for card in registry.cards:
        if card.id.strip().casefold() == wanted:
            return card, False
    return select_card_auto(choice_response, registry, embedder), True


def _generate_card_documents(
    card: KnowledgeCard,
    question: str,
    providers: ProviderSet,
) -> list[KnowledgeDocument]:
    """One generation call per document, as temperature samples."""
    generator = providers.generator_for(card.provider_ref)
    params = card.default_gen_params
    docs = []
    for _ in range(params.num_documents):
        request = GenerationRequest(
            prompt=question,
            n=1,
            temperature=params.temperature,
            max_new_tokens=params.max_new_tokens,
        )
        for text in generate(generator, request).texts:
            docs.append(KnowledgeDocument(card_id=card.id, raw=text))
    return docs


def _drop_empty(docs: Sequence[KnowledgeDocument]) -> list[KnowledgeDocument]:
    return [doc for doc in docs if doc.raw.strip()]


def run_vanilla(task: QueryTask, providers: ProviderSet) -> IntegrationResult:
    """Baseline: the LLM alone on the in-context examples and the question."""
    transcript = Transcript()
    prompt = assemble_prompt([
        task.icl_prefix,
        f"{QUESTION_PREFIX} {task.question}",
        ANSWER_PREFIX,
    ])
    response = llm_complete(providers.llm, prompt, transcript, stop=task.stop_sequences)
    return IntegrationResult(
        answer=extract_answer(task, response),
        raw_response=response,
        transcript=transcript,
        knowledge_used=[],
        iterations=0,
        abstain_path=False,
        telemetry=QueryTelemetry(),
    )


def run_bottom_up(
    task: QueryTask,
    registry: Registry,
    providers: ProviderSet,
    config: PipelineConfig,
    rng: Random,
    *,
    jobs: int = 1,
) -> IntegrationResult:
    """Activate every card, filter the knowledge stream, answer once."""
    if not registry.cards:
        raise ContractError("run_bottom_up: registry has no cards")
    telemetry = QueryTelemetry()

    if jobs > 1 and len(registry.cards) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            per_card = list(pool.map(
                lambda card: _generate_card_documents(card, task.question, providers),
                registry.cards,
            ))
    else:
        per_card = [
            _generate_card_documents(card, task.question, providers)
            for card in registry.cards
        ]
    # Re-assembled in registry order regardless of completion order.
    docs = _drop_empty([doc for card_docs in per_card for doc in card_docs])

    if docs and config.filters.relevance:
        docs = relevance_filter(task.question, docs, config.n2, providers.embedder)
    if docs and config.filters.pruning:
        docs = pruning_filter(docs, providers.summarizer)
    if docs and config.filters.factuality:
        docs = score_factuality(
            docs,
            providers.retriever,
            providers.sum_fact_scorer,
            providers.retrieval_fact_scorer,
            config.retrieval_k,
        )
        telemetry.factuality_scores.extend((doc.card_id, doc.s_d) for doc in docs)
        docs = factuality_sample(docs, config.fact_top_k, config.n3, rng)

    if not docs:
        log.warning("bottom-up: no documents survived the filters; prompting without knowledge")

    transcript = Transcript()
    prompt = assemble_prompt([
        task.icl_prefix,
        format_knowledge_block(docs),
        f"{QUESTION_PREFIX} {task.question}",
        ANSWER_PREFIX,
    ])
    response = llm_complete(providers.llm, prompt, transcript, stop=task.stop_sequences)
    return IntegrationResult(
        answer=extract_answer(task, response),
        raw_response=response,
        transcript=transcript,
        knowledge_used=list(docs),
        iterations=0,
        abstain_path=False,
        telemetry=telemetry,
    )


def run_top_down(
    task: QueryTask,
    registry: Registry,
    providers: ProviderSet,
    config: PipelineConfig,
    strategy: SelectionStrategy,
    rng: Random,
    *,
    select_by_sampling: bool = False,
) -> IntegrationResult:
    """Let the LLM request knowledge on demand, one card per iteration.

    ``select_by_sampling`` switches the per-iteration document choice from
    deterministic argmax over factuality to top-k sampling with a pool of
    ``fact_top_k``.
    """
    if not registry.cards:
        raise ContractError("run_top_down: registry has no cards")
    for card in registry.cards:
        if not card.description:
            raise ContractError(f"run_top_down: card '{card.id}' has no description")

    telemetry = QueryTelemetry()
    transcript = Transcript()
    lines: list[str] = []
    if task.icl_prefix.strip():
        lines.append(task.icl_prefix.rstrip())
    lines.append(f"{QUESTION_PREFIX} {task.question}")

    knowledge_used: list[KnowledgeDocument] = []
    abstain_path = False

    def ask(prompt_line: str) -> str:
        # Control questions expect single-line answers, so live backends get
        # a newline stop; scripted stubs are unaffected.
        lines.append(prompt_line)
        response = llm_complete(providers.llm, assemble_prompt(lines), transcript, stop=("\n",))
        lines.append(response.strip())
        return response

    for iteration in range(config.max_iterations + 1):
        gate_response = ask(PROMPT_NEED_INFO)
        decision, ambiguous = parse_yes_no(gate_response)
        if ambiguous:
            telemetry.ambiguous_yes_no += 1
        if telemetry.first_gate is None:
            telemetry.first_gate = decision.value
        if decision is YesNo.NO:
            if iteration == 0:
                abstain_path = True
            break
        if iteration >= config.max_iterations:
            break  # knowledge budget spent; force the answer

        if strategy is SelectionStrategy.AUTO:
            need_response = ask(PROMPT_WHAT_KIND)
            card = select_card_auto(need_response, registry, providers.embedder)
        else:
            listing = ", ".join(desc for _, desc in list_card_descriptions(registry))
            choice_response = ask(f"{PROMPT_CHOOSE_SOURCE} {listing}.")
            card, fell_back = select_card_explicit(choice_response, registry, providers.embedder)
            if fell_back:
                telemetry.explicit_fallbacks += 1
        telemetry.selected_cards.append(card.id)

        docs = _drop_empty(_generate_card_documents(card, task.question, providers))
        if not docs:
            log.warning("top-down: card '%s' generated no usable documents", card.id)
            continue
        docs = score_factuality(
            docs,
            providers.retriever,
            providers.sum_fact_scorer,
            providers.retrieval_fact_scorer,
            config.retrieval_k,
        )
        telemetry.factuality_scores.extend((doc.card_id, doc.s_d) for doc in docs)
        if select_by_sampling:
            chosen = factuality_sample(docs, config.fact_top_k, 1, rng)[0]
        else:
            chosen = max(enumerate(docs), key=lambda item: (item[1].s_d, -item[0]))[1]
        knowledge_used.append(chosen)
        lines.append(f"{KNOWLEDGE_PREFIX} {chosen.text_for_prompt}")

    lines.append(ANSWER_PREFIX)
    response = llm_complete(providers.llm, assemble_prompt(lines), transcript,
                            stop=task.stop_sequences)
    return IntegrationResult(
        answer=extract_answer(task, response),
        raw_response=response,
        transcript=transcript,
        knowledge_used=knowledge_used,
        iterations=len(knowledge_used),
        abstain_path=abstain_path,
        telemetry=telemetry,
    )


def transcript_to_jsonl(transcript: Transcript) -> str:
    """Line-delimited record format used by golden tests and --transcript."""
    import json

    lines = [
        json.dumps(
            {"prompt": turn.prompt, "response": turn.response, "provider_id": turn.provider_id},
            ensure_ascii=False,
            sort_keys=True,
        )
        for turn in transcript.turns
    ]
    return "\n".join(lines) + ("\n" if lines else "")
