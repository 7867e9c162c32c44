"""Deterministic in-process providers.

Every stub is a pure function of its request: identical inputs give
identical outputs across runs, which is what makes golden-transcript and
forced-outcome tests possible without any model weights.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Sequence

from ..errors import ConfigError, ProtocolError
from .base import (
    EmbeddingResponse,
    FactScoreResponse,
    GenerationRequest,
    GenerationResponse,
    RetrievalResponse,
    RetrievedDocument,
)

_WORD = re.compile(r"\w+")
_FIRST_SENTENCE = re.compile(r"\s*(.+?[.!?])(?=\s|$)", re.S)


def _tokens(text: str) -> set[str]:
    return set(_WORD.findall(text.lower()))


class EchoGenerator:
    """Echoes the prompt with a per-request counter suffix."""

    def __init__(self, endpoint_id: str = "stub-echo"):
        self.endpoint_id = endpoint_id

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        return GenerationResponse(tuple(f"{request.prompt}:gen{i}" for i in range(request.n)))


class BagOfCharsEmbedder:
    """Counts characters into ``DIMENSION`` buckets keyed by code point."""

    DIMENSION = 64

    def __init__(self, endpoint_id: str = "stub-embed"):
        self.endpoint_id = endpoint_id

    def embed(self, texts: Sequence[str]) -> EmbeddingResponse:
        vectors = []
        for text in texts:
            counts = [0.0] * self.DIMENSION
            for ch in text.lower():
                counts[ord(ch) % self.DIMENSION] += 1.0
            vectors.append(tuple(counts))
        return EmbeddingResponse(tuple(vectors))


class FirstSentenceSummarizer:
    """Truncates to the first sentence; text without one passes unchanged."""

    def __init__(self, endpoint_id: str = "stub-summarize"):
        self.endpoint_id = endpoint_id

    def summarize(self, text: str) -> str:
        match = _FIRST_SENTENCE.match(text)
        return match.group(1) if match else text.strip()


class TokenOverlapScorer:
    """Scores the fraction of claim tokens that appear in the evidence."""

    def __init__(self, endpoint_id: str = "stub-fact"):
        self.endpoint_id = endpoint_id

    def fact_score(self, claim: str, evidence: str) -> FactScoreResponse:
        claim_tokens = _tokens(claim)
        if not claim_tokens:
            return FactScoreResponse(0.0)
        overlap = len(claim_tokens & _tokens(evidence))
        return FactScoreResponse(overlap / len(claim_tokens))


class InMemoryRetriever:
    """Ranks a fixed corpus by shared-token count with the query."""

    def __init__(self, corpus: Sequence[RetrievedDocument] = (), endpoint_id: str = "stub-retrieve"):
        self.endpoint_id = endpoint_id
        self.corpus = tuple(corpus)

    @classmethod
    def from_jsonl(cls, path: str | Path, endpoint_id: str = "stub-retrieve") -> "InMemoryRetriever":
        docs = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                docs.append(RetrievedDocument(text=str(raw["text"]), source_id=str(raw["source_id"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: malformed corpus line ({exc})") from exc
        return cls(docs, endpoint_id=endpoint_id)

    def retrieve(self, query: str, k: int) -> RetrievalResponse:
        query_tokens = _tokens(query)
        scored = []
        for index, doc in enumerate(self.corpus):
            score = len(query_tokens & _tokens(doc.text))
            if score > 0:
                scored.append((-score, index, doc))
        scored.sort()
        return RetrievalResponse(tuple(doc for _, _, doc in scored[:k]))


class ScriptedLlm:
    """Table-driven LLM: exact prompt in, scripted response out.

    An unscripted prompt is a test-setup bug, surfaced as a protocol error.
    """

    def __init__(self, script: dict[str, str] | None = None, endpoint_id: str = "stub-llm"):
        self.endpoint_id = endpoint_id
        self.script = dict(script or {})

    @classmethod
    def from_json(cls, path: str | Path, endpoint_id: str = "stub-llm") -> "ScriptedLlm":
        try:
            script = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"scripted LLM file {path} failed to load: {exc}") from exc
        if not isinstance(script, dict):
            raise ConfigError(f"scripted LLM file {path} must hold a prompt->response object")
        return cls({str(k): str(v) for k, v in script.items()}, endpoint_id=endpoint_id)

    def complete(self, prompt: str, stop: Sequence[str] | None = None) -> str:
        if prompt not in self.script:
            preview = prompt if len(prompt) <= 120 else prompt[:117] + "..."
            raise ProtocolError(self.endpoint_id, f"no script entry for prompt: {preview!r}")
        return self.script[prompt]


STUB_NAMES = {
    "echo": EchoGenerator,
    "bag-of-chars": BagOfCharsEmbedder,
    "first-sentence": FirstSentenceSummarizer,
    "token-overlap": TokenOverlapScorer,
    "memory-retriever": InMemoryRetriever,
    "scripted": ScriptedLlm,
}


def build_stub(name: str, endpoint_id: str, options: dict[str, str], base_dir: Path):
    """Instantiate a named stub, resolving file options against ``base_dir``."""
    if name == "echo":
        return EchoGenerator(endpoint_id=endpoint_id)
    if name == "bag-of-chars":
        return BagOfCharsEmbedder(endpoint_id=endpoint_id)
    if name == "first-sentence":
        return FirstSentenceSummarizer(endpoint_id=endpoint_id)
    if name == "token-overlap":
        return TokenOverlapScorer(endpoint_id=endpoint_id)
    if name == "memory-retriever":
        corpus = options.get("corpus")
        if corpus is None:
            return InMemoryRetriever(endpoint_id=endpoint_id)
        return InMemoryRetriever.from_jsonl(base_dir / corpus, endpoint_id=endpoint_id)
    if name == "scripted":
        script = options.get("script")
        if script is None:
            return ScriptedLlm(endpoint_id=endpoint_id)
        return ScriptedLlm.from_json(base_dir / script, endpoint_id=endpoint_id)
    raise ConfigError(f"unknown stub provider '{name}' (known: {sorted(STUB_NAMES)})")
