"""Sentence encoder: hashed character-trigram features through a seeded
random projection. Untrained but a genuine neural mapping, deterministic
for fixed weights, so similar texts land near each other in feature space."""

from __future__ import annotations

import zlib

import torch
from torch import nn

FEATURE_DIM = 2048
EMBED_DIM = 128


class TextEncoder(nn.Module):
    def __init__(self, seed: int = 1309, device: str = "cpu"):
        super().__init__()
        generator = torch.Generator().manual_seed(seed)
        self.projection = nn.Linear(FEATURE_DIM, EMBED_DIM, bias=False)
        with torch.no_grad():
            self.projection.weight.copy_(
                torch.randn(EMBED_DIM, FEATURE_DIM, generator=generator) / FEATURE_DIM ** 0.5)
        self.to(device)
        self.eval()

    @staticmethod
    def featurize(text: str) -> torch.Tensor:
        counts = torch.zeros(FEATURE_DIM)
        padded = f"  {text.lower()} "
        for i in range(len(padded) - 2):
            trigram = padded[i:i + 3].encode("utf-8", errors="replace")
            counts[zlib.crc32(trigram) % FEATURE_DIM] += 1.0
        return torch.log1p(counts)

    @torch.no_grad()
    def encode(self, texts: list[str]) -> list[list[float]]:
        features = torch.stack([self.featurize(text) for text in texts])
        vectors = torch.tanh(self.projection(features))
        return [[float(x) for x in row] for row in vectors]

    @torch.no_grad()
    def encode_tensor(self, texts: list[str]) -> torch.Tensor:
        features = torch.stack([self.featurize(text) for text in texts])
        return torch.tanh(self.projection(features))
