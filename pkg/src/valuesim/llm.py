"""Completion backends, the rate-limited client, and answer parsing."""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Protocol

from . import transport
from .errors import ConfigError, MockMissError, ParseError, TransportError
from .survey import Question, QuestionType

DEFAULT_TOKEN_ENV = "VALUESIM_API_TOKEN"


@dataclass(frozen=True)
class CompletionConfig:
    model: str = "mock"
    endpoint: str = ""
    temperature: float = 0.2
    top_p: float = 0.9
    max_tokens: int = 512
    timeout_s: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 4
    backoff_base: float = 0.5
    token_env: str = DEFAULT_TOKEN_ENV

    def __post_init__(self):
        if not 0.0 < self.temperature < 1.0:
            raise ConfigError(f"temperature must be in (0, 1), got {self.temperature}")
        if not 0.0 < self.top_p < 1.0:
            raise ConfigError(f"top_p must be in (0, 1), got {self.top_p}")
        if self.max_tokens < 1:
            raise ConfigError(f"max_tokens must be positive, got {self.max_tokens}")
        if self.max_retries < 0:
            raise ConfigError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.max_in_flight < 1:
            raise ConfigError(f"max_in_flight must be >= 1, got {self.max_in_flight}")
        if self.timeout_s <= 0:
            raise ConfigError(f"timeout_s must be positive, got {self.timeout_s}")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    retries: int
    latency_s: float


class ParseKind(str, Enum):
    ANSWER = "answer"
    REFUSAL = "refusal"
    UNPARSEABLE = "unparseable"


@dataclass(frozen=True)
class ParsedAnswer:
    kind: ParseKind
    label: str | None = None


@dataclass(frozen=True)
class Prediction:
    """A model's response for one entry; latency and retries stay in memory
    and are never serialized, so artifacts hash identically across runs."""

    entry_key: str
    raw_text: str
    parsed: ParsedAnswer
    retries: int = 0
    latency_s: float = 0.0


class CompletionBackend(Protocol):
    name: str

    def generate(self, prompt: str) -> str: ...


class HttpChatBackend:
    """Chat-completion HTTP backend using the common JSON wire format.

    Requests carry {"model", "messages", "temperature", "top_p",
    "max_tokens"}; replies are read from choices[0].message.content.  The
    bearer token comes from the configured environment variable.
    """

    name = "http"

    def __init__(self, cfg: CompletionConfig):
        if not cfg.endpoint:
            raise ConfigError("http backend requires an endpoint")
        self.cfg = cfg

    def generate(self, prompt: str) -> str:
        cfg = self.cfg
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(cfg.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = transport.post_json(
            cfg.endpoint,
            {
                "model": cfg.model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": cfg.temperature,
                "top_p": cfg.top_p,
                "max_tokens": cfg.max_tokens,
            },
            headers=headers,
            timeout=cfg.timeout_s,
        )
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise TransportError(
                f"completion reply missing choices[0].message.content: {str(body)[:200]}"
            ) from None
        if not isinstance(text, str):
            raise TransportError("completion content is not a string")
        return text


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class CannedBackend:
    """Replays recorded responses keyed by SHA-256 of the exact prompt text.

    JSONL records: {"prompt_sha256": <hex>, "response": <text>}.
    """

    name = "canned"

    def __init__(self, responses: dict[str, str]):
        self._responses = dict(responses)

    @classmethod
    def from_jsonl(cls, raw: str | bytes) -> "CannedBackend":
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        responses = {}
        for i, ln in enumerate(raw.splitlines(), start=1):
            if not ln.strip():
                continue
            try:
                rec = json.loads(ln)
                responses[rec["prompt_sha256"]] = rec["response"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise ParseError("canned record needs prompt_sha256 and response", i) from None
        return cls(responses)

    def generate(self, prompt: str) -> str:
        key = prompt_key(prompt)
        try:
            return self._responses[key]
        except KeyError:
            raise MockMissError(
                f"no canned response for prompt {key[:16]}… ({prompt[:60]!r})"
            ) from None


_HISTORY_PATTERNS = (
    re.compile(r"The answer in \d{4} is ([A-Za-z0-9]+)\."),
    re.compile(r"\d{4}年的答案是([A-Za-z0-9]+)。"),
)
_EVENT_ID_LINE = re.compile(r"^- \[([^\]\s]+)\]", re.MULTILINE)
_FIRST_LETTER_OPTION = re.compile(r"^\(([A-Z])\)", re.MULTILINE)
_FIRST_NUMERIC_OPTION = re.compile(r"^(\d+)$", re.MULTILINE)
_IMPACT_REQUEST_MARKER = "IMPACTS:"
_MOCK_LEVELS = ("None", "Low", "Medium", "High")


class ScriptedMockBackend:
    """Deterministic offline backend.

    Impact-rating prompts get a well-formed IMPACTS block whose levels are a
    stable hash of (seed, event id).  Answer prompts echo the most recent
    historical answer; with no history, the first listed option is chosen.
    """

    name = "mock"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _level(self, event_id: str) -> str:
        digest = hashlib.sha256(f"{self.seed}:{event_id}".encode("utf-8")).hexdigest()
        return _MOCK_LEVELS[int(digest, 16) % len(_MOCK_LEVELS)]

    def generate(self, prompt: str) -> str:
        if _IMPACT_REQUEST_MARKER in prompt:
            ids = _EVENT_ID_LINE.findall(prompt)
            lines = [f"{eid} | {self._level(eid)} | scripted rating" for eid in ids]
            return "IMPACTS:\n" + "\n".join(lines)
        echoed = None
        for pattern in _HISTORY_PATTERNS:
            hits = pattern.findall(prompt)
            if hits:
                echoed = hits[-1]
        if echoed is not None:
            return f"({echoed})"
        m = _FIRST_LETTER_OPTION.search(prompt)
        if m:
            return f"({m.group(1)})"
        m = _FIRST_NUMERIC_OPTION.search(prompt)
        if m:
            return f"({m.group(1)})"
        return "(A)"


class CompletionClient:
    """Serializes access to a backend: bounded concurrency plus retry/backoff."""

    def __init__(
        self,
        cfg: CompletionConfig,
        backend: CompletionBackend,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.cfg = cfg
        self.backend = backend
        self._sleep = sleep
        self._gate = threading.BoundedSemaphore(cfg.max_in_flight)

    def complete(self, prompt: str) -> CompletionResult:
        start = time.perf_counter()
        with self._gate:
            text, retries = transport.with_retries(
                lambda: self.backend.generate(prompt),
                max_retries=self.cfg.max_retries,
                backoff_base=self.cfg.backoff_base,
                sleep=self._sleep,
            )
        return CompletionResult(text=text, retries=retries, latency_s=time.perf_counter() - start)


# Phrases that mark a response as a refusal, checked before any answer
# extraction so option letters inside the phrase are never misread.
REFUSAL_MARKERS = ("i cannot answer", "i can't answer", "无法回答")

_PAREN_LETTER = re.compile(r"\(([A-Za-z])\)")
_LEADING_LETTER = re.compile(r"\s*([A-Za-z])(?![A-Za-z0-9])")
_INT_TOKEN = re.compile(r"(?<![\w.])(\d+)(?!\.?\d)")


def parse_answer(text: str, question: Question) -> ParsedAnswer:
    """Map a raw model response to an answer label for the question.

    Refusals win over extraction.  Single-choice: a parenthesized letter
    anywhere, else a leading bare letter.  Scale: the first standalone
    integer that is one of the scale's points.  Everything else is
    unparseable; scoring treats refusals and unparseables as wrong.
    """
    lowered = text.lower()
    if any(marker in lowered for marker in REFUSAL_MARKERS):
        return ParsedAnswer(kind=ParseKind.REFUSAL)
    if question.qtype is QuestionType.SINGLE_CHOICE:
        m = _PAREN_LETTER.search(text) or _LEADING_LETTER.match(text)
        if m:
            idx = ord(m.group(1).upper()) - ord("A")
            if 0 <= idx < len(question.options):
                return ParsedAnswer(kind=ParseKind.ANSWER, label=question.options[idx].label)
        return ParsedAnswer(kind=ParseKind.UNPARSEABLE)
    by_text = {opt.text.strip(): opt.label for opt in question.options}
    for m in _INT_TOKEN.finditer(text):
        token = str(int(m.group(1)))
        if token in by_text:
            return ParsedAnswer(kind=ParseKind.ANSWER, label=by_text[token])
    return ParsedAnswer(kind=ParseKind.UNPARSEABLE)


def prediction_to_dict(pred: Prediction) -> dict:
    return {
        "entry_key": pred.entry_key,
        "raw_text": pred.raw_text,
        "parsed": {"kind": pred.parsed.kind.value, "label": pred.parsed.label},
    }


def prediction_from_dict(rec: dict) -> Prediction:
    try:
        parsed = ParsedAnswer(
            kind=ParseKind(rec["parsed"]["kind"]), label=rec["parsed"]["label"]
        )
        return Prediction(entry_key=rec["entry_key"], raw_text=rec["raw_text"], parsed=parsed)
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed prediction record: {e}") from None
