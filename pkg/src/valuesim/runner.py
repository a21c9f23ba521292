"""Simulation orchestration: retrieval, prompting, completion, scoring.

The manifest written for a run contains only result-determining inputs
(semantic config, seed, counts, artifact hashes), so two runs that differ in
execution knobs alone — concurrency, timeouts, retry budget — produce
byte-identical artifacts.  Wall-clock facts go to a separate unhashed log.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import metrics as metrics_mod
from .cohort import Dataset, Entry
from .embeddings import EmbeddingProvider
from .errors import (
    AbortedRunError,
    ConfigError,
    ImpactParseError,
    PreconditionError,
    TransportError,
)
from .events import EventPool
from .llm import (
    CompletionBackend,
    CompletionClient,
    CompletionConfig,
    ParseKind,
    ParsedAnswer,
    Prediction,
    parse_answer,
    prediction_to_dict,
)
from .prompts import (
    PersonaContext,
    PromptBundle,
    PromptRegime,
    build_base_prompt,
    build_eap_prompt,
    build_impact_prompt,
    parse_impact_response,
)
from .retrieval import (
    STRATEGIES,
    STRATEGY_DIRECT,
    STRATEGY_RANDOM,
    STRATEGY_VALUE,
    RetrievalResult,
    direct_match_events,
    random_k_events,
    top_k_events,
)
from .survey import Question

ABLATION_FULL = "full"
ABLATION_NO_EVENT = "no-event"
ABLATION_NO_HISTORY_EVENT = "no-history-event"
ABLATIONS = (ABLATION_FULL, ABLATION_NO_EVENT, ABLATION_NO_HISTORY_EVENT)

DEFAULT_EVENT_K = 3
TRANSPORT_FAILURE_PREFIX = "[transport-error]"


@dataclass(frozen=True)
class RunConfig:
    regime: PromptRegime = PromptRegime.EVENT_AWARE
    ablation: str = ABLATION_FULL
    event_k: int = DEFAULT_EVENT_K
    event_strategy: str = STRATEGY_VALUE
    seed: int = 0
    failure_ceiling: float = 0.2
    completion: CompletionConfig = field(default_factory=CompletionConfig)

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"unknown ablation {self.ablation!r} (expected {ABLATIONS})")
        if self.event_strategy not in STRATEGIES:
            raise ConfigError(
                f"unknown event strategy {self.event_strategy!r} (expected {STRATEGIES})"
            )
        if self.event_k < 1:
            raise ConfigError(f"event_k must be >= 1, got {self.event_k}")
        if not 0.0 <= self.failure_ceiling <= 1.0:
            raise ConfigError(f"failure_ceiling must be in [0, 1], got {self.failure_ceiling}")


def effective_regime(cfg: RunConfig) -> PromptRegime:
    """Resolve the prompt regime after applying the ablation.

    Removing events from the event-aware regime is exactly the trajectory
    regime; removing history and events is exactly the vanilla regime.
    """
    if cfg.ablation == ABLATION_NO_HISTORY_EVENT:
        return PromptRegime.VANILLA
    if cfg.ablation == ABLATION_NO_EVENT and cfg.regime is PromptRegime.EVENT_AWARE:
        return PromptRegime.TRAJECTORY
    return cfg.regime


@dataclass
class RunResult:
    predictions: tuple[Prediction, ...]
    report: metrics_mod.MetricsReport
    manifest: dict
    run_log: dict


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def predictions_to_jsonl(predictions: Sequence[Prediction]) -> str:
    return "".join(
        json.dumps(prediction_to_dict(p), sort_keys=True, ensure_ascii=False) + "\n"
        for p in predictions
    )


def semantic_config(cfg: RunConfig, dataset: Dataset, inputs: dict | None = None) -> dict:
    """The result-determining slice of the configuration.

    Transport and concurrency knobs are deliberately absent: they change how
    fast a run finishes, never what it computes.  ``inputs`` lets callers pin
    the identity of input artifacts (paths, upstream hashes).
    """
    return {
        "country": dataset.country.value,
        "prev_wave": dataset.prev_wave,
        "target_wave": dataset.target_wave,
        "regime": cfg.regime.value,
        "ablation": cfg.ablation,
        "event_k": cfg.event_k,
        "event_strategy": cfg.event_strategy,
        "seed": cfg.seed,
        "model": cfg.completion.model,
        "temperature": cfg.completion.temperature,
        "top_p": cfg.completion.top_p,
        "max_tokens": cfg.completion.max_tokens,
        "inputs": dict(inputs or {}),
    }


def config_hash(semantic: dict) -> str:
    return hashlib.sha256(
        json.dumps(semantic, sort_keys=True, ensure_ascii=False).encode("utf-8")
    ).hexdigest()


def retrieve_for_questions(
    cfg: RunConfig,
    questions: Sequence[Question],
    pool: EventPool,
    provider: EmbeddingProvider | None,
) -> dict[str, RetrievalResult]:
    """One retrieval per distinct question, computed serially for determinism."""
    results: dict[str, RetrievalResult] = {}
    for q in sorted(questions, key=lambda q: q.id):
        if cfg.event_strategy == STRATEGY_RANDOM:
            results[q.id] = random_k_events(pool, cfg.event_k, seed=f"{cfg.seed}:{q.id}")
        elif cfg.event_strategy == STRATEGY_DIRECT:
            results[q.id] = direct_match_events(q, pool, cfg.event_k, provider)
        else:
            results[q.id] = top_k_events(q.theme, pool, cfg.event_k, provider)
    return results


def build_entry_prompt(
    entry: Entry,
    question: Question,
    regime: PromptRegime,
) -> PromptBundle:
    """The base (vanilla or trajectory) prompt for one dataset entry."""
    persona = PersonaContext(
        country=entry.country, target_year=entry.target_year, key=entry.cohort_key
    )
    if regime is PromptRegime.VANILLA:
        return build_base_prompt(persona, question)
    return build_base_prompt(persona, question, history=[(entry.prev_year, entry.prev_label)])


def run_simulation(
    cfg: RunConfig,
    dataset: Dataset,
    catalog: Mapping[str, Question],
    backend: CompletionBackend,
    pool: EventPool | None = None,
    embed_provider: EmbeddingProvider | None = None,
    inputs: dict | None = None,
) -> RunResult:
    """Predict every dataset entry and score the result.

    Event-aware entries make two model calls (impact rating, then the
    answer); an unusable impact rating falls back to the trajectory prompt
    and is counted.  Entry-level transport failures become unparseable
    predictions until they exceed the failure ceiling, at which point the
    run aborts with a partial manifest.
    """
    if not dataset.entries:
        raise PreconditionError("dataset has no entries to simulate")
    regime = effective_regime(cfg)
    questions = {}
    for entry in dataset.entries:
        q = catalog.get(entry.question_id)
        if q is None:
            raise PreconditionError(f"catalog has no entry for question {entry.question_id!r}")
        questions[entry.question_id] = q

    retrievals: dict[str, RetrievalResult] = {}
    events_by_id = {}
    if regime is PromptRegime.EVENT_AWARE:
        if pool is None:
            raise PreconditionError("event-aware runs need an event pool")
        if cfg.event_strategy != STRATEGY_RANDOM and embed_provider is None:
            raise PreconditionError(
                f"event strategy {cfg.event_strategy!r} needs an embedding provider"
            )
        events_by_id = {e.id: e for e in pool.events}
        retrievals = retrieve_for_questions(cfg, list(questions.values()), pool, embed_provider)

    client = CompletionClient(cfg.completion, backend)
    total = len(dataset.entries)
    max_failures = cfg.failure_ceiling * total
    lock = threading.Lock()
    counters = {"transport_failures": 0, "impact_fallbacks": 0, "retries": 0}
    abort = threading.Event()
    started = time.time()
    t0 = time.perf_counter()

    def work(entry: Entry) -> Prediction:
        key = entry.key_str()
        if abort.is_set():
            return Prediction(
                entry_key=key,
                raw_text=f"{TRANSPORT_FAILURE_PREFIX} aborted",
                parsed=ParsedAnswer(kind=ParseKind.UNPARSEABLE),
            )
        question = questions[entry.question_id]
        try:
            bundle = build_entry_prompt(entry, question, regime)
            retries = 0
            if regime is PromptRegime.EVENT_AWARE:
                result = retrievals[entry.question_id]
                events = [events_by_id[eid] for eid in result.event_ids()]
                persona = bundle.persona
                impact_prompt = build_impact_prompt(
                    persona, question, entry.prev_year, events
                )
                impact_reply = client.complete(impact_prompt)
                retries += impact_reply.retries
                try:
                    records = parse_impact_response(
                        impact_reply.text, [e.id for e in events]
                    )
                    bundle = build_eap_prompt(bundle, records, events)
                except ImpactParseError:
                    with lock:
                        counters["impact_fallbacks"] += 1
            reply = client.complete(bundle.rendered)
            retries += reply.retries
            with lock:
                counters["retries"] += retries
            return Prediction(
                entry_key=key,
                raw_text=reply.text,
                parsed=parse_answer(reply.text, question),
                retries=retries,
                latency_s=reply.latency_s,
            )
        except TransportError as e:
            with lock:
                counters["transport_failures"] += 1
                if counters["transport_failures"] > max_failures:
                    abort.set()
            return Prediction(
                entry_key=key,
                raw_text=f"{TRANSPORT_FAILURE_PREFIX} {e}",
                parsed=ParsedAnswer(kind=ParseKind.UNPARSEABLE),
            )

    ordered = sorted(dataset.entries, key=lambda e: e.key())
    with ThreadPoolExecutor(max_workers=cfg.completion.max_in_flight) as pool_exec:
        predictions = tuple(pool_exec.map(work, ordered))

    wall = time.perf_counter() - t0
    semantic = semantic_config(cfg, dataset, inputs)
    if abort.is_set():
        partial = {
            "config": semantic,
            "config_hash": config_hash(semantic),
            "aborted": True,
            "counts": {
                "entries": total,
                "transport_failures": counters["transport_failures"],
            },
        }
        raise AbortedRunError(
            f"aborted: {counters['transport_failures']} transport failures exceed "
            f"ceiling {cfg.failure_ceiling:.0%} of {total} entries",
            partial_manifest=partial,
        )

    report = metrics_mod.score(ordered, predictions, catalog)
    pred_blob = predictions_to_jsonl(predictions)
    report_blob = canonical_json(metrics_mod.report_to_dict(report))
    manifest = {
        "config": semantic,
        "config_hash": config_hash(semantic),
        "counts": {
            "entries": total,
            "skipped_missing_prev": dataset.skipped_missing_prev,
            "skipped_missing_gold": dataset.skipped_missing_gold,
            "refusals": report.refusals,
            "unparseable": report.unparseable,
            "impact_fallbacks": counters["impact_fallbacks"],
            "transport_failures": counters["transport_failures"],
        },
        "artifacts": {
            "predictions_sha256": hashlib.sha256(pred_blob.encode("utf-8")).hexdigest(),
            "report_sha256": hashlib.sha256(report_blob.encode("utf-8")).hexdigest(),
        },
    }
    run_log = {
        "started_unix": started,
        "wall_time_s": wall,
        "backend": getattr(backend, "name", type(backend).__name__),
        "max_in_flight": cfg.completion.max_in_flight,
        "retries_total": counters["retries"],
        "mean_latency_s": (
            sum(p.latency_s for p in predictions) / len(predictions) if predictions else 0.0
        ),
    }
    return RunResult(predictions=predictions, report=report, manifest=manifest, run_log=run_log)


def write_run(result: RunResult, out_dir: str | Path) -> Path:
    """Write run artifacts under a directory named by the config hash.

    manifest.json, predictions.jsonl and report.json are deterministic;
    run_log.json carries the timing facts and is excluded from hashing.
    """
    run_dir = Path(out_dir) / f"run-{result.manifest['config_hash'][:12]}"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "manifest.json").write_text(canonical_json(result.manifest), encoding="utf-8")
    (run_dir / "predictions.jsonl").write_text(
        predictions_to_jsonl(result.predictions), encoding="utf-8"
    )
    (run_dir / "report.json").write_text(
        canonical_json(metrics_mod.report_to_dict(result.report)), encoding="utf-8"
    )
    (run_dir / "run_log.json").write_text(canonical_json(result.run_log), encoding="utf-8")
    return run_dir
