"""Lexical BM25 retrieval over a line-delimited JSON corpus.

Ranking is fully deterministic: BM25 score descending, ties broken by
source_id, then by position in the corpus file.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

_TOKEN = re.compile(r"\w+")

BM25_K1 = 1.5
BM25_B = 0.75


class CorpusError(ValueError):
    """Malformed retrieval corpus file."""


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class CorpusDocument:
    text: str
    source_id: str


class Bm25Index:
    def __init__(self, documents: list[CorpusDocument]):
        self.documents = documents
        self._term_freqs = [Counter(tokenize(doc.text)) for doc in documents]
        self._lengths = [sum(tf.values()) for tf in self._term_freqs]
        self._avg_length = (sum(self._lengths) / len(self._lengths)) if documents else 0.0
        self._doc_freq: Counter[str] = Counter()
        for tf in self._term_freqs:
            self._doc_freq.update(tf.keys())

    def __len__(self) -> int:
        return len(self.documents)

    def _idf(self, term: str) -> float:
        df = self._doc_freq.get(term, 0)
        return math.log((len(self.documents) - df + 0.5) / (df + 0.5) + 1.0)

    def score(self, query: str, index: int) -> float:
        tf = self._term_freqs[index]
        length_norm = 1 - BM25_B + BM25_B * (
            self._lengths[index] / self._avg_length if self._avg_length else 0.0)
        total = 0.0
        for term in set(tokenize(query)):
            frequency = tf.get(term, 0)
            if not frequency:
                continue
            total += self._idf(term) * frequency * (BM25_K1 + 1) / (
                frequency + BM25_K1 * length_norm)
        return total

    def retrieve(self, query: str, k: int) -> list[CorpusDocument]:
        scored = []
        for index, doc in enumerate(self.documents):
            score = self.score(query, index)
            if score > 0.0:
                scored.append((-score, doc.source_id, index))
        scored.sort()
        return [self.documents[index] for _, _, index in scored[:k]]


def build_index(corpus_path: str | Path | None) -> Bm25Index:
    """Index a {text, source_id} JSONL corpus; no path yields an empty index."""
    if corpus_path is None:
        return Bm25Index([])
    path = Path(corpus_path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    documents = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            documents.append(CorpusDocument(text=str(raw["text"]), source_id=str(raw["source_id"])))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CorpusError(f"{path}:{lineno}: malformed corpus line ({exc})") from exc
    return Bm25Index(documents)
