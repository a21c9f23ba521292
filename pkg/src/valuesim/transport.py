"""HTTP plumbing shared by the embedding and completion clients."""

from __future__ import annotations

import random
import time
from typing import Callable, TypeVar

import requests

from .errors import TransportError

T = TypeVar("T")


def jittered_backoff(attempt: int, base: float = 0.5, cap: float = 8.0) -> float:
    delay = min(cap, base * (2 ** attempt))
    return delay * (0.5 + random.random() / 2)


def with_retries(
    fn: Callable[[], T],
    max_retries: int = 3,
    backoff_base: float = 0.5,
    backoff_cap: float = 8.0,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[T, int]:
    """Run fn, retrying retryable transport failures; returns (result, retries)."""
    attempt = 0
    while True:
        try:
            return fn(), attempt
        except TransportError as e:
            if not e.retryable or attempt >= max_retries:
                raise
            sleep(jittered_backoff(attempt, backoff_base, backoff_cap))
            attempt += 1


def post_json(
    url: str,
    payload: dict,
    headers: dict[str, str] | None = None,
    timeout: float = 30.0,
) -> dict:
    """POST JSON and decode a JSON reply; non-2xx statuses become TransportError.

    Rate limits (429), server errors (5xx), timeouts and connection drops are
    marked retryable; other 4xx are permanent.
    """
    try:
        resp = requests.post(url, json=payload, headers=headers or {}, timeout=timeout)
    except requests.Timeout:
        raise TransportError(f"request to {url} timed out after {timeout}s", retryable=True) from None
    except requests.ConnectionError as e:
        raise TransportError(f"connection to {url} failed: {e}", retryable=True) from None
    if resp.status_code == 429 or resp.status_code >= 500:
        raise TransportError(
            f"HTTP {resp.status_code} from {url}", status=resp.status_code, retryable=True
        )
    if resp.status_code >= 400:
        raise TransportError(
            f"HTTP {resp.status_code} from {url}: {resp.text[:200]}",
            status=resp.status_code,
            retryable=False,
        )
    try:
        body = resp.json()
    except ValueError:
        raise TransportError(f"non-JSON response from {url}", status=resp.status_code) from None
    if not isinstance(body, dict):
        raise TransportError(f"unexpected response shape from {url}", status=resp.status_code)
    return body
