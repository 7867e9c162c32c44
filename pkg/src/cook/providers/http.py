"""Wire-protocol client: JSON over HTTP, one POST route per capability.

Transport failures are retried once; protocol violations (bad schema,
out-of-range values, non-429 HTTP errors) are never retried because they
indicate a buggy provider rather than a flaky network.
"""

from __future__ import annotations

from typing import Sequence

import httpx

from ..errors import ProtocolError, RateLimitError, TransportError
from .base import (
    EmbeddingResponse,
    FactScoreResponse,
    GenerationRequest,
    GenerationResponse,
    RetrievalResponse,
    RetrievedDocument,
)


class HttpProvider:
    """Client for one endpoint serving any subset of the /v1/* routes."""

    def __init__(self, endpoint_id: str, url: str, timeout: float = 60.0,
                 transport: httpx.BaseTransport | None = None):
        self.endpoint_id = endpoint_id
        self.url = url.rstrip("/")
        self.timeout = timeout
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def _post(self, route: str, payload: dict) -> dict:
        last_exc: Exception | None = None
        for attempt in range(2):
            try:
                response = self._client.post(f"{self.url}{route}", json=payload)
                break
            except httpx.HTTPError as exc:
                last_exc = exc
        else:
            raise TransportError(self.endpoint_id, f"POST {route} failed: {last_exc}")
        if response.status_code == 429:
            raise RateLimitError(self.endpoint_id, f"POST {route} rate limited")
        if response.status_code >= 400:
            detail = ""
            try:
                detail = str(response.json().get("error", ""))
            except Exception:
                detail = response.text[:200]
            raise ProtocolError(self.endpoint_id, f"POST {route} -> HTTP {response.status_code}: {detail}")
        try:
            body = response.json()
        except ValueError as exc:
            raise ProtocolError(self.endpoint_id, f"POST {route} returned non-JSON body") from exc
        if not isinstance(body, dict):
            raise ProtocolError(self.endpoint_id, f"POST {route} returned a non-object body")
        return body

    def _field(self, body: dict, route: str, name: str, kind: type):
        if name not in body:
            raise ProtocolError(self.endpoint_id, f"{route} response missing field '{name}'")
        value = body[name]
        if not isinstance(value, kind):
            raise ProtocolError(self.endpoint_id, f"{route} field '{name}' has wrong type")
        return value

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        body = self._post("/v1/generate", {
            "prompt": request.prompt,
            "n": request.n,
            "temperature": request.temperature,
            "max_new_tokens": request.max_new_tokens,
        })
        texts = self._field(body, "/v1/generate", "texts", list)
        if not all(isinstance(t, str) for t in texts):
            raise ProtocolError(self.endpoint_id, "/v1/generate texts must all be strings")
        return GenerationResponse(tuple(texts))

    def embed(self, texts: Sequence[str]) -> EmbeddingResponse:
        body = self._post("/v1/embed", {"texts": list(texts)})
        vectors = self._field(body, "/v1/embed", "vectors", list)
        parsed = []
        for vec in vectors:
            if not isinstance(vec, list) or not all(isinstance(x, (int, float)) for x in vec):
                raise ProtocolError(self.endpoint_id, "/v1/embed vectors must be lists of numbers")
            parsed.append(tuple(float(x) for x in vec))
        return EmbeddingResponse(tuple(parsed))

    def summarize(self, text: str) -> str:
        body = self._post("/v1/summarize", {"text": text})
        return self._field(body, "/v1/summarize", "summary", str)

    def fact_score(self, claim: str, evidence: str) -> FactScoreResponse:
        body = self._post("/v1/fact_score", {"claim": claim, "evidence": evidence})
        score = self._field(body, "/v1/fact_score", "score", (int, float))
        return FactScoreResponse(float(score))

    def retrieve(self, query: str, k: int) -> RetrievalResponse:
        body = self._post("/v1/retrieve", {"query": query, "k": k})
        documents = self._field(body, "/v1/retrieve", "documents", list)
        parsed = []
        for doc in documents:
            if not isinstance(doc, dict) or "text" not in doc or "source_id" not in doc:
                raise ProtocolError(self.endpoint_id, "/v1/retrieve documents need text and source_id")
            parsed.append(RetrievedDocument(text=str(doc["text"]), source_id=str(doc["source_id"])))
        return RetrievalResponse(tuple(parsed))

    def complete(self, prompt: str, stop: Sequence[str] | None = None) -> str:
        payload: dict = {"prompt": prompt}
        if stop:
            payload["stop"] = list(stop)
        body = self._post("/v1/complete", payload)
        return self._field(body, "/v1/complete", "text", str)
