"""Text embedding behind a provider abstraction.

Two providers share one contract (fixed dimension, unit L2 norm, input
capped at a token budget): a deterministic local feature-hashing embedder
usable offline and as a test oracle, and a client for a remote embedding
service whose responses are re-validated before use.
"""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass

import httpx
import numpy as np

from .errors import EngineError, ProviderError
from .ragchain import truncate_to_token_budget

TOKEN_RE = re.compile(r"[a-z0-9]+")

NORM_TOLERANCE = 1e-5
REMOTE_NORM_TOLERANCE = 1e-3


@dataclass(frozen=True)
class EmbedderConfig:
    provider: str = "local_hash"  # "local_hash" | "remote"
    dimension: int = 768
    max_input_tokens: int = 8192
    model_id: str = "local-hash-v1"
    endpoint: str | None = None

    def __post_init__(self):
        if self.provider not in ("local_hash", "remote"):
            raise ValueError(f"unknown embedding provider '{self.provider}'")
        if self.dimension < 8:
            raise ValueError("embedding dimension must be >= 8")
        if self.max_input_tokens < 1:
            raise ValueError("max_input_tokens must be >= 1")


def _token_hash(token: str) -> int:
    """Fixed seedless 64-bit hash; stable across processes and platforms."""
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")


def _local_hash_vector(text: str, dimension: int) -> np.ndarray:
    accum = np.zeros(dimension, dtype=np.float64)
    for token in TOKEN_RE.findall(text.lower()):
        h = _token_hash(token)
        sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
        accum[h % dimension] += sign
    norm = float(np.linalg.norm(accum))
    if norm == 0.0:
        raise EngineError(
            "invalid_input",
            "text has no hashable tokens; refusing to emit a zero vector",
            stage="embedding",
        )
    return (accum / norm).astype(np.float32)


def _prepare(text: str, config: EmbedderConfig) -> str:
    if not text or not text.strip():
        raise EngineError("invalid_input", "cannot embed empty text", stage="embedding")
    return truncate_to_token_budget(text, config.max_input_tokens)


class LocalHashEmbedder:
    """Deterministic feature-hashing embedder.

    Tokens are lowercased alphanumeric runs; each adds +/-1 (sign taken from
    the hash's top bit) into bucket ``hash % dimension``, then the vector is
    L2-normalized. Pure: same bytes in, same floats out, in any process.
    """

    def __init__(self, config: EmbedderConfig):
        self.config = config

    def embed_text(self, text: str) -> np.ndarray:
        return _local_hash_vector(_prepare(text, self.config), self.config.dimension)

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        vectors = []
        for index, text in enumerate(texts):
            try:
                vectors.append(self.embed_text(text))
            except EngineError as exc:
                raise EngineError(
                    exc.code, f"text at index {index}: {exc.message}", stage="embedding"
                ) from exc
        return vectors


class RemoteEmbedder:
    """Client for an HTTP embedding service: POST {model_id, texts[]} -> [[f32]].

    Responses are untrusted: lengths must match the configured dimension and
    norms within 1e-3 of unit are re-normalized, anything further rejected.
    In-flight requests are bounded by a semaphore.
    """

    def __init__(
        self,
        config: EmbedderConfig,
        *,
        max_in_flight: int = 4,
        timeout: float = 60.0,
        client: httpx.Client | None = None,
    ):
        if not config.endpoint:
            raise ValueError("remote embedder requires an endpoint")
        self.config = config
        self._client = client or httpx.Client(timeout=timeout)
        self._slots = threading.Semaphore(max_in_flight)

    def embed_text(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        prepared = []
        for index, text in enumerate(texts):
            try:
                prepared.append(_prepare(text, self.config))
            except EngineError as exc:
                raise EngineError(
                    exc.code, f"text at index {index}: {exc.message}", stage="embedding"
                ) from exc
        if not prepared:
            return []
        body = {"model_id": self.config.model_id, "texts": prepared}
        with self._slots:
            try:
                response = self._client.post(self.config.endpoint, json=body)
            except httpx.HTTPError as exc:
                raise ProviderError(
                    f"embedding endpoint unreachable: {exc}", retryable=True, stage="embedding"
                ) from exc
        if response.status_code != 200:
            raise ProviderError(
                f"embedding endpoint returned {response.status_code}",
                retryable=response.status_code >= 500,
                stage="embedding",
            )
        payload = response.json()
        if not isinstance(payload, list) or len(payload) != len(prepared):
            raise ProviderError("embedding endpoint returned a malformed body", retryable=False, stage="embedding")
        return [self._validate(row) for row in payload]

    def _validate(self, row: object) -> np.ndarray:
        if not isinstance(row, list) or len(row) != self.config.dimension:
            raise ProviderError(
                f"embedding has wrong dimension (expected {self.config.dimension})",
                retryable=False,
                stage="embedding",
            )
        vector = np.asarray(row, dtype=np.float64)
        norm = float(np.linalg.norm(vector))
        if abs(norm - 1.0) > REMOTE_NORM_TOLERANCE or norm == 0.0:
            raise ProviderError(
                f"embedding norm {norm:.6f} out of tolerance", retryable=False, stage="embedding"
            )
        return (vector / norm).astype(np.float32)


def build_embedder(config: EmbedderConfig, **kwargs):
    if config.provider == "remote":
        return RemoteEmbedder(config, **kwargs)
    return LocalHashEmbedder(config)


def check_vector(vector: np.ndarray, dimension: int) -> None:
    """Assert the embedding contract: exact length and unit L2 norm."""
    if vector.shape != (dimension,):
        raise EngineError(
            "dimension_mismatch",
            f"vector has length {vector.shape[0] if vector.ndim == 1 else vector.shape}, expected {dimension}",
            stage="embedding",
        )
    norm = float(np.linalg.norm(vector.astype(np.float64)))
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise EngineError(
            "invalid_input", f"vector norm {norm} violates the unit-norm contract", stage="embedding"
        )
