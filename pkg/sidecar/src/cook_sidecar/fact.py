"""Entailment-style fact scorer over encoder features.

The head is a logistic squash of the claim/evidence cosine in encoder
feature space, with a fixed decision midpoint rather than trained weights,
so scores are directionally meaningful out of the box: a claim restated by
the evidence scores near 1, unrelated text scores near 0. Outputs are
clamped into [0, 1].
"""

from __future__ import annotations

import torch
from torch import nn

from .encoder import TextEncoder

COSINE_MIDPOINT = 0.35
LOGISTIC_GAIN = 5.0


class EntailmentScorer(nn.Module):
    def __init__(self, encoder: TextEncoder, device: str = "cpu"):
        super().__init__()
        self.encoder = encoder
        self.register_buffer("midpoint", torch.tensor(COSINE_MIDPOINT))
        self.register_buffer("gain", torch.tensor(LOGISTIC_GAIN))
        self.to(device)
        self.eval()

    @torch.no_grad()
    def score(self, claim: str, evidence: str) -> float:
        u, v = self.encoder.encode_tensor([claim, evidence])
        cosine = torch.nn.functional.cosine_similarity(u.unsqueeze(0), v.unsqueeze(0))[0]
        raw = torch.sigmoid(self.gain * (cosine - self.midpoint)).item()
        return min(1.0, max(0.0, raw))
