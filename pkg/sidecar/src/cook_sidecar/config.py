"""Sidecar configuration: which model plays each role, retrieval corpus, port."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class SidecarConfigError(ValueError):
    """Invalid sidecar configuration."""


@dataclass(frozen=True)
class SidecarConfig:
    generation_model_id: str = "tiny:char-lm"
    embedding_model_id: str = "tiny:text-encoder"
    summarizer_model_id: str = "tiny:extractive"
    fact_model_id: str = "tiny:entailment"
    corpus_path: str | None = None
    device: str = "cpu"
    port: int = 8731
    # /v1/complete carries no generation parameters on the wire; these
    # server-side defaults apply to every completion.
    complete_max_new_tokens: int = 64
    complete_temperature: float = 0.7

    def __post_init__(self) -> None:
        if not 1024 <= self.port <= 65535:
            raise SidecarConfigError(f"port {self.port} outside [1024, 65535]")
        if self.complete_max_new_tokens < 1:
            raise SidecarConfigError("complete_max_new_tokens must be >= 1")
        if self.complete_temperature < 0:
            raise SidecarConfigError("complete_temperature must be nonnegative")


def load_config(path: str | Path) -> SidecarConfig:
    path = Path(path)
    if not path.exists():
        raise SidecarConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SidecarConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SidecarConfigError(f"config file {path} must hold a JSON object")
    known = {field for field in SidecarConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise SidecarConfigError(f"config file {path}: unknown field(s) {sorted(unknown)}")
    return SidecarConfig(**raw)
