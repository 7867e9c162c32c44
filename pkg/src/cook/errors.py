"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: config 2, provider 3, dataset 4.
"""

from __future__ import annotations


class CookError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CookError):
    """Registry or pipeline configuration is invalid."""


class DatasetError(CookError):
    """Evaluation dataset could not be loaded or fails validation."""


class ContractError(CookError):
    """A caller violated an operation precondition (programming error)."""


class ProviderError(CookError):
    """Base class for failures of an external model provider."""

    def __init__(self, endpoint_id: str, message: str):
        super().__init__(f"[{endpoint_id}] {message}")
        self.endpoint_id = endpoint_id


class TransportError(ProviderError):
    """Endpoint unreachable or the connection failed. Retried once."""


class ProtocolError(ProviderError):
    """Endpoint answered, but the response violates the wire contract.

    Never retried: this indicates a buggy provider, not a flaky network.
    """


class RateLimitError(ProviderError):
    """Endpoint signalled rate limiting (HTTP 429). Safe to retry later."""
