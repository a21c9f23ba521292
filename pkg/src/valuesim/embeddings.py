"""Embedding providers: remote service, precomputed store, and a local mock."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from typing import Iterable, Protocol

from . import transport
from .errors import ContractError, EmbeddingMissError, ParseError, PreconditionError, SchemaError

DEFAULT_TOKEN_ENV = "VALUESIM_API_TOKEN"


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    provider_tag: str

    @property
    def dim(self) -> int:
        return len(self.values)


class EmbeddingProvider(Protocol):
    provider_tag: str

    def embed(self, text: str, language: str = "en") -> EmbeddingVector: ...


def text_key(text: str) -> str:
    """Stable lookup key for a text: hex SHA-256 of its UTF-8 bytes."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def embed_text(text: str, provider: EmbeddingProvider, language: str = "en") -> EmbeddingVector:
    """Embed one text through a provider, enforcing the vector contract."""
    if not text.strip():
        raise PreconditionError("cannot embed empty text")
    vec = provider.embed(text, language=language)
    if not vec.values:
        raise ContractError(f"provider {vec.provider_tag!r} returned an empty vector")
    if any(not math.isfinite(v) for v in vec.values):
        raise ContractError(f"provider {vec.provider_tag!r} returned non-finite components")
    return vec


class CharHistogramProvider:
    """Deterministic local mock: counts code points into dim buckets (mod dim)."""

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise PreconditionError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.provider_tag = f"char-histogram-{dim}"

    def embed(self, text: str, language: str = "en") -> EmbeddingVector:
        counts = [0.0] * self.dim
        for ch in text:
            counts[ord(ch) % self.dim] += 1.0
        return EmbeddingVector(values=tuple(counts), provider_tag=self.provider_tag)


class FileVectorStore:
    """Read-only store of precomputed vectors keyed by SHA-256 of the text.

    JSONL records: {"key_hash": <hex sha256>, "dim": int, "values": [floats]}.
    A lookup miss is an error naming the missing hash, so stale stores fail
    loudly instead of silently degrading retrieval.
    """

    def __init__(self, raw: str | bytes, name: str = "store"):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        self.provider_tag = f"file:{name}"
        self._vectors: dict[str, tuple[float, ...]] = {}
        self.dim: int | None = None
        for i, ln in enumerate(raw.splitlines(), start=1):
            if not ln.strip():
                continue
            try:
                rec = json.loads(ln)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON: {e.msg}", i) from None
            try:
                key, dim, values = rec["key_hash"], int(rec["dim"]), rec["values"]
            except (KeyError, TypeError, ValueError):
                raise ParseError("vector record needs key_hash, dim and values", i) from None
            if len(values) != dim:
                raise SchemaError(f"line {i}: declared dim {dim} but {len(values)} values")
            if self.dim is None:
                self.dim = dim
            elif dim != self.dim:
                raise SchemaError(f"line {i}: dim {dim} conflicts with store dim {self.dim}")
            self._vectors[key] = tuple(float(v) for v in values)

    @classmethod
    def from_path(cls, path) -> "FileVectorStore":
        with open(path, "rb") as fh:
            return cls(fh.read(), name=os.path.basename(str(path)))

    def __len__(self) -> int:
        return len(self._vectors)

    def embed(self, text: str, language: str = "en") -> EmbeddingVector:
        key = text_key(text)
        values = self._vectors.get(key)
        if values is None:
            raise EmbeddingMissError(
                f"{self.provider_tag} has no vector for key {key} "
                f"(text starts {text[:40]!r}); regenerate the store"
            )
        return EmbeddingVector(values=values, provider_tag=self.provider_tag)


def write_vector_store(entries: Iterable[tuple[str, Iterable[float]]]) -> str:
    """Serialize (text, vector) pairs into the store's JSONL format."""
    lines = []
    for text, values in entries:
        vals = [float(v) for v in values]
        lines.append(
            json.dumps({"key_hash": text_key(text), "dim": len(vals), "values": vals})
        )
    return "".join(ln + "\n" for ln in lines)


class HttpEmbeddingProvider:
    """Client for a JSON embedding service.

    Wire format: POST {"input": [text], "model": name} and the reply carries
    {"data": [{"embedding": [floats]}]}.  The bearer token is read from the
    environment so credentials stay out of configs.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        timeout: float = 30.0,
        max_retries: int = 3,
        token_env: str = DEFAULT_TOKEN_ENV,
        backoff_base: float = 0.5,
    ):
        if not endpoint:
            raise PreconditionError("embedding endpoint must be non-empty")
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self.max_retries = max_retries
        self.token_env = token_env
        self.backoff_base = backoff_base
        self.provider_tag = f"http:{model}"
        self.dim: int | None = None

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def embed(self, text: str, language: str = "en") -> EmbeddingVector:
        payload = {"input": [text], "model": self.model}
        body, _retries = transport.with_retries(
            lambda: transport.post_json(
                self.endpoint, payload, headers=self._headers(), timeout=self.timeout
            ),
            max_retries=self.max_retries,
            backoff_base=self.backoff_base,
        )
        try:
            values = tuple(float(v) for v in body["data"][0]["embedding"])
        except (KeyError, IndexError, TypeError, ValueError):
            raise ContractError(
                f"embedding service reply missing data[0].embedding: {str(body)[:200]}"
            ) from None
        if self.dim is None:
            self.dim = len(values)
        elif len(values) != self.dim:
            raise ContractError(
                f"embedding service changed dimension: {len(values)} != {self.dim}"
            )
        return EmbeddingVector(values=values, provider_tag=self.provider_tag)
