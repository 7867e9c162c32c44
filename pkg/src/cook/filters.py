"""The three knowledge filters: relevance, pruning, and factuality.

All operations here are pure transformations over lists of
``KnowledgeDocument``: inputs are never mutated, and given the same inputs
and RNG state the outputs are identical across runs.

Factuality combines two scores per document: how faithfully the condensed
version captures the original (``s_sum``), and how strongly retrieved
evidence supports the original text (``s_fact``, the max over retrieved
documents). Their mean ``s_d`` drives top-k sampling: the k highest-scoring
documents form the candidate pool, everything else gets probability exactly
zero, and candidates are drawn without replacement proportionally to
exp(s_d), renormalized after each draw. Sampling (rather than a plain
argmax) keeps recent knowledge alive even when fact-checking evidence for
it is thin.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from random import Random
from typing import Sequence

import numpy as np

from .errors import ContractError, ProviderError
from .providers import (
    EmbeddingProvider,
    FactScoringProvider,
    RetrievalProvider,
    SummarizationProvider,
    embed,
    fact_score,
    retrieve,
    summarize,
)

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class KnowledgeDocument:
    """One generated document and everything the filters learned about it."""

    card_id: str
    raw: str
    pruned: str | None = None
    relevance: float | None = None
    s_sum: float | None = None
    s_fact: float | None = None
    s_d: float | None = None
    evidence_found: bool = False

    @property
    def text_for_prompt(self) -> str:
        """Condensed text when pruning ran, the original otherwise."""
        return self.pruned if self.pruned is not None else self.raw


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine on unit-normalized vectors; zero vectors rank last at -1."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        return -1.0
    return float(np.dot(va / na, vb / nb))


def relevance_filter(
    query: str,
    docs: Sequence[KnowledgeDocument],
    keep: int,
    embedder: EmbeddingProvider,
) -> list[KnowledgeDocument]:
    """Keep the ``keep`` documents most similar to the query.

    Ties break toward earlier input positions and the kept documents stay in
    their original relative order.
    """
    if not docs:
        raise ContractError("relevance_filter: docs must be non-empty")
    if keep < 1:
        raise ContractError("relevance_filter: keep must be >= 1")
    response = embed(embedder, [query] + [doc.raw for doc in docs])
    query_vec = response.vectors[0]
    scored = [
        replace(doc, relevance=cosine_similarity(vec, query_vec))
        for doc, vec in zip(docs, response.vectors[1:])
    ]
    ranked = sorted(range(len(scored)), key=lambda i: (-scored[i].relevance, i))
    kept = sorted(ranked[: min(keep, len(scored))])
    return [scored[i] for i in kept]


def _sentence_count(text: str) -> int:
    return len([s for s in _SENTENCE_SPLIT.split(text.strip()) if s])


def pruning_filter(
    docs: Sequence[KnowledgeDocument],
    summarizer: SummarizationProvider,
) -> list[KnowledgeDocument]:
    """Condense each document; the original is retained for fact scoring.

    Documents of at most one sentence pass through with ``pruned == raw``.
    """
    out = []
    for index, doc in enumerate(docs):
        if not doc.raw:
            raise ContractError(f"pruning_filter: docs[{index}] has empty raw text")
        if _sentence_count(doc.raw) <= 1:
            out.append(replace(doc, pruned=doc.raw))
            continue
        try:
            out.append(replace(doc, pruned=summarize(summarizer, doc.raw)))
        except ProviderError as exc:
            raise type(exc)(exc.endpoint_id, f"while pruning docs[{index}]: {exc}") from exc
    return out


def score_summarization_factuality(
    doc: KnowledgeDocument,
    scorer: FactScoringProvider,
) -> KnowledgeDocument:
    """Score how faithfully the condensed text captures the original."""
    if doc.pruned is None:
        raise ContractError("score_summarization_factuality: document has no pruned text")
    response = fact_score(scorer, claim=doc.pruned, evidence=doc.raw)
    return replace(doc, s_sum=response.score)


def _score_condensation(doc: KnowledgeDocument, scorer: FactScoringProvider) -> KnowledgeDocument:
    # Documents that skipped the pruning stage keep pruned unset; the raw
    # text then stands in as its own condensed version for this score.
    claim = doc.pruned if doc.pruned is not None else doc.raw
    response = fact_score(scorer, claim=claim, evidence=doc.raw)
    return replace(doc, s_sum=response.score)


def score_retrieval_factuality(
    doc: KnowledgeDocument,
    retriever: RetrievalProvider,
    scorer: FactScoringProvider,
    retrieval_k: int,
) -> KnowledgeDocument:
    """Score support from retrieved evidence: max over the k hits.

    When retrieval comes back empty the document keeps ``s_fact`` unset and
    ``evidence_found`` false; the aggregate then falls back to ``s_sum``
    alone rather than penalizing knowledge the corpus simply has not caught
    up with.
    """
    if not doc.raw:
        raise ContractError("score_retrieval_factuality: document has empty raw text")
    hits = retrieve(retriever, doc.raw, retrieval_k)
    if not hits.documents:
        return replace(doc, s_fact=None, evidence_found=False)
    best = max(fact_score(scorer, claim=doc.raw, evidence=hit.text).score for hit in hits.documents)
    return replace(doc, s_fact=best, evidence_found=True)


def aggregate_factuality(doc: KnowledgeDocument) -> KnowledgeDocument:
    """Combine the two factuality scores into ``s_d``."""
    if doc.s_sum is None:
        raise ContractError("aggregate_factuality: s_sum missing")
    if doc.evidence_found:
        if doc.s_fact is None:
            raise ContractError("aggregate_factuality: evidence_found set but s_fact missing")
        return replace(doc, s_d=(doc.s_sum + doc.s_fact) / 2.0)
    return replace(doc, s_d=doc.s_sum)


def score_factuality(
    docs: Sequence[KnowledgeDocument],
    retriever: RetrievalProvider,
    sum_scorer: FactScoringProvider,
    retrieval_scorer: FactScoringProvider,
    retrieval_k: int,
) -> list[KnowledgeDocument]:
    """Run both factuality measures and aggregate, per document."""
    out = []
    for doc in docs:
        doc = _score_condensation(doc, sum_scorer)
        doc = score_retrieval_factuality(doc, retriever, retrieval_scorer, retrieval_k)
        out.append(aggregate_factuality(doc))
    return out


def _softmax_weights(scores: Sequence[float]) -> list[float]:
    # Max-subtraction for numerical stability; no behavioral change since
    # scores live in [0, 1].
    top = max(scores)
    return [math.exp(s - top) for s in scores]


def factuality_sample(
    docs: Sequence[KnowledgeDocument],
    k: int,
    keep: int,
    rng: Random,
) -> list[KnowledgeDocument]:
    """Top-k factuality sampling: draw ``keep`` documents without replacement.

    Only the ``k`` documents with the highest ``s_d`` (ties by input order)
    can be drawn; all others have probability exactly zero. The softmax over
    the pool is renormalized after every draw, and the drawn set is returned
    sorted by ``s_d`` descending.
    """
    if any(doc.s_d is None for doc in docs):
        raise ContractError("factuality_sample: every document needs s_d")
    if keep < 1:
        raise ContractError("factuality_sample: keep must be >= 1")

    def by_score(items: list[tuple[int, KnowledgeDocument]]) -> list[KnowledgeDocument]:
        return [doc for _, doc in sorted(items, key=lambda item: (-item[1].s_d, item[0]))]

    indexed = list(enumerate(docs))
    if len(indexed) <= keep:
        return by_score(indexed)
    if k < keep:
        raise ContractError("factuality_sample: k must be >= the number of documents to keep")

    k = min(k, len(indexed))
    pool = sorted(indexed, key=lambda item: (-item[1].s_d, item[0]))[:k]
    drawn: list[tuple[int, KnowledgeDocument]] = []
    for _ in range(keep):
        weights = _softmax_weights([doc.s_d for _, doc in pool])
        total = sum(weights)
        pick = rng.random() * total
        cumulative = 0.0
        chosen = len(pool) - 1
        for position, weight in enumerate(weights):
            cumulative += weight
            if pick < cumulative:
                chosen = position
                break
        drawn.append(pool.pop(chosen))
    return by_score(drawn)


def sampling_probabilities(docs: Sequence[KnowledgeDocument], k: int) -> list[float]:
    """First-draw probability of each document under top-k sampling.

    Documents outside the top-k pool get exactly 0. Exposed for telemetry
    and for verifying the sampler against its analytic distribution.
    """
    if any(doc.s_d is None for doc in docs):
        raise ContractError("sampling_probabilities: every document needs s_d")
    k = min(k, len(docs))
    pool = sorted(range(len(docs)), key=lambda i: (-docs[i].s_d, i))[:k]
    weights = _softmax_weights([docs[i].s_d for i in pool])
    total = sum(weights)
    probabilities = [0.0] * len(docs)
    for index, weight in zip(pool, weights):
        probabilities[index] = weight / total
    return probabilities
