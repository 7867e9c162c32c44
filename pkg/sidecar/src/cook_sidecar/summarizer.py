"""Summarization via encoder salience: keep the sentence closest to the
whole document in embedding space. Single-sentence input passes through."""

from __future__ import annotations

import re

import torch

from .encoder import TextEncoder

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def split_sentences(text: str) -> list[str]:
    return [s for s in _SENTENCE_SPLIT.split(text.strip()) if s]


class SalienceSummarizer:
    def __init__(self, encoder: TextEncoder):
        self.encoder = encoder

    def summarize(self, text: str) -> str:
        sentences = split_sentences(text)
        if len(sentences) <= 1:
            return text.strip()
        vectors = self.encoder.encode_tensor([text] + sentences)
        doc_vec = vectors[0]
        sentence_vecs = vectors[1:]
        sims = torch.nn.functional.cosine_similarity(
            sentence_vecs, doc_vec.unsqueeze(0).expand_as(sentence_vecs), dim=1)
        best = int(torch.argmax(sims))
        return sentences[best]
