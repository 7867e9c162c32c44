"""Character-level causal transformer for document generation and completion.

The model is small (two layers, 64-dim) and deliberately untrained: the
sidecar exists to serve the wire protocol with real neural inference, not
to produce good prose. Sampling is seeded per request from the request
content, so the server stays stateless: request order never changes any
response.
"""

from __future__ import annotations

import hashlib

import torch
from torch import nn

VOCAB = ["<bos>", "<unk>", "\n"] + [chr(code) for code in range(32, 127)]
CHAR_TO_ID = {ch: i for i, ch in enumerate(VOCAB)}
BOS_ID = 0
UNK_ID = 1
CONTEXT_WINDOW = 256


def request_seed(*parts: object) -> int:
    digest = hashlib.sha256(repr(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class CharCausalLM(nn.Module):
    def __init__(self, seed: int = 271, device: str = "cpu",
                 d_model: int = 64, n_layers: int = 2, n_heads: int = 4):
        super().__init__()
        torch.manual_seed(seed)
        self.embedding = nn.Embedding(len(VOCAB), d_model)
        self.positions = nn.Embedding(CONTEXT_WINDOW, d_model)
        layer = nn.TransformerEncoderLayer(
            d_model=d_model, nhead=n_heads, dim_feedforward=2 * d_model,
            batch_first=True, dropout=0.0)
        self.blocks = nn.TransformerEncoder(layer, num_layers=n_layers)
        self.lm_head = nn.Linear(d_model, len(VOCAB))
        self.device_name = device
        self.to(device)
        self.eval()

    def _encode_prompt(self, prompt: str) -> list[int]:
        ids = [BOS_ID] + [CHAR_TO_ID.get(ch, UNK_ID) for ch in prompt]
        return ids[-CONTEXT_WINDOW:]

    @torch.no_grad()
    def _next_logits(self, ids: list[int]) -> torch.Tensor:
        window = ids[-CONTEXT_WINDOW:]
        tokens = torch.tensor([window], dtype=torch.long, device=self.device_name)
        positions = torch.arange(len(window), device=self.device_name).unsqueeze(0)
        hidden = self.embedding(tokens) + self.positions(positions)
        mask = torch.triu(
            torch.ones(len(window), len(window), dtype=torch.bool, device=self.device_name),
            diagonal=1)
        hidden = self.blocks(hidden, mask=mask)
        return self.lm_head(hidden[0, -1])

    @torch.no_grad()
    def generate_one(self, prompt: str, temperature: float, max_new_tokens: int,
                     seed: int) -> str:
        generator = torch.Generator().manual_seed(seed)
        ids = self._encode_prompt(prompt)
        out_chars: list[str] = []
        for _ in range(max_new_tokens):
            logits = self._next_logits(ids)
            logits[BOS_ID] = float("-inf")
            if temperature <= 1e-6:
                token = int(torch.argmax(logits))
            else:
                probabilities = torch.softmax(logits / temperature, dim=-1)
                token = int(torch.multinomial(probabilities, 1, generator=generator))
            ids.append(token)
            out_chars.append(VOCAB[token] if token != UNK_ID else " ")
        return "".join(out_chars)

    def generate(self, prompt: str, n: int, temperature: float, max_new_tokens: int) -> list[str]:
        return [
            self.generate_one(
                prompt, temperature, max_new_tokens,
                seed=request_seed("generate", prompt, index, temperature, max_new_tokens))
            for index in range(n)
        ]

    def complete(self, prompt: str, stop: list[str] | None,
                 temperature: float, max_new_tokens: int) -> str:
        text = self.generate_one(
            prompt, temperature, max_new_tokens,
            seed=request_seed("complete", prompt, temperature, max_new_tokens))
        for sequence in stop or []:
            cut = text.find(sequence)
            if cut != -1:
                text = text[:cut]
        return text
