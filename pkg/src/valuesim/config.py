"""Pipeline configuration: one JSON file drives every CLI command."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .llm import CompletionConfig
from .prompts import PromptRegime
from .retrieval import STRATEGIES
from .survey import DEFAULT_NON_SUBSTANTIVE
from .taxonomy import Country, parse_enum

STAGES = ("train", "test1", "test2")
BACKEND_KINDS = ("mock", "http", "canned")
EMBED_KINDS = ("mock", "file", "http")

_TOP_LEVEL_KEYS = {
    "country", "paths", "stage", "regime", "ablation", "events", "min_cohort_n",
    "seed", "non_substantive", "backend", "embeddings",
}
_PATH_KEYS = {"wave5", "wave6", "wave7", "catalog", "events", "vectors", "canned", "output"}


@dataclass(frozen=True)
class PipelineConfig:
    country: Country
    wave_paths: dict[int, Path]
    catalog_path: Path
    output_dir: Path
    events_path: Path | None = None
    vectors_path: Path | None = None
    canned_path: Path | None = None
    stage: str = "test1"
    regime: PromptRegime = PromptRegime.EVENT_AWARE
    ablation: str = "full"
    event_k: int = 3
    event_strategy: str = "value"
    excluded_years: tuple[int, ...] | None = None
    min_cohort_n: int = 5
    seed: int = 0
    non_substantive: frozenset[str] = DEFAULT_NON_SUBSTANTIVE
    backend_kind: str = "mock"
    completion: CompletionConfig = field(default_factory=CompletionConfig)
    embed_kind: str = "mock"
    embed_dim: int = 64
    embed_endpoint: str = ""
    embed_model: str = ""

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ConfigError(f"stage must be one of {STAGES}, got {self.stage!r}")
        if self.event_strategy not in STRATEGIES:
            raise ConfigError(
                f"event strategy must be one of {STRATEGIES}, got {self.event_strategy!r}"
            )
        if self.backend_kind not in BACKEND_KINDS:
            raise ConfigError(
                f"backend must be one of {BACKEND_KINDS}, got {self.backend_kind!r}"
            )
        if self.embed_kind not in EMBED_KINDS:
            raise ConfigError(
                f"embeddings kind must be one of {EMBED_KINDS}, got {self.embed_kind!r}"
            )
        if self.min_cohort_n < 1:
            raise ConfigError(f"min_cohort_n must be >= 1, got {self.min_cohort_n}")
        if self.event_k < 1:
            raise ConfigError(f"event k must be >= 1, got {self.event_k}")


def _as_path(base: Path, value, key: str) -> Path:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"paths.{key} must be a non-empty string")
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_config(path: str | Path) -> PipelineConfig:
    """Read and validate a JSON config; relative paths resolve against it."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")

    base = path.parent
    paths = raw.get("paths")
    if not isinstance(paths, dict):
        raise ConfigError("config needs a paths object")
    unknown_paths = set(paths) - _PATH_KEYS
    if unknown_paths:
        raise ConfigError(f"unknown paths key(s): {', '.join(sorted(unknown_paths))}")
    for key in ("wave5", "wave6", "wave7", "catalog", "output"):
        if key not in paths:
            raise ConfigError(f"paths.{key} is required")

    try:
        country = parse_enum(Country, raw.get("country", ""), "country")
    except ConfigError:
        raise ConfigError("config needs country: CN or US") from None

    events_cfg = raw.get("events", {})
    if not isinstance(events_cfg, dict):
        raise ConfigError("events must be an object")
    excluded = events_cfg.get("excluded_years")
    if excluded is not None:
        try:
            excluded = tuple(sorted(int(y) for y in excluded))
        except (TypeError, ValueError):
            raise ConfigError("events.excluded_years must be a list of integers") from None

    backend_cfg = dict(raw.get("backend", {}))
    if not isinstance(backend_cfg, dict):
        raise ConfigError("backend must be an object")
    backend_kind = backend_cfg.pop("kind", "mock")
    try:
        completion = CompletionConfig(**backend_cfg)
    except TypeError as e:
        raise ConfigError(f"bad backend option: {e}") from None

    embed_cfg = raw.get("embeddings", {})
    if not isinstance(embed_cfg, dict):
        raise ConfigError("embeddings must be an object")

    non_sub = raw.get("non_substantive")
    if non_sub is not None:
        if not isinstance(non_sub, list) or not all(isinstance(s, str) for s in non_sub):
            raise ConfigError("non_substantive must be a list of strings")
        non_sub = frozenset(non_sub)

    regime_token = raw.get("regime", PromptRegime.EVENT_AWARE.value)
    try:
        regime = PromptRegime(regime_token)
    except ValueError:
        valid = ", ".join(r.value for r in PromptRegime)
        raise ConfigError(f"regime must be one of: {valid}; got {regime_token!r}") from None

    return PipelineConfig(
        country=country,
        wave_paths={w: _as_path(base, paths[f"wave{w}"], f"wave{w}") for w in (5, 6, 7)},
        catalog_path=_as_path(base, paths["catalog"], "catalog"),
        output_dir=_as_path(base, paths["output"], "output"),
        events_path=_as_path(base, paths["events"], "events") if "events" in paths else None,
        vectors_path=_as_path(base, paths["vectors"], "vectors") if "vectors" in paths else None,
        canned_path=_as_path(base, paths["canned"], "canned") if "canned" in paths else None,
        stage=raw.get("stage", "test1"),
        regime=regime,
        ablation=raw.get("ablation", "full"),
        event_k=int(events_cfg.get("k", 3)),
        event_strategy=events_cfg.get("strategy", "value"),
        excluded_years=excluded,
        min_cohort_n=int(raw.get("min_cohort_n", 5)),
        seed=int(raw.get("seed", 0)),
        non_substantive=non_sub if non_sub is not None else DEFAULT_NON_SUBSTANTIVE,
        backend_kind=backend_kind,
        completion=completion,
        embed_kind=embed_cfg.get("kind", "mock"),
        embed_dim=int(embed_cfg.get("dim", 64)),
        embed_endpoint=embed_cfg.get("endpoint", ""),
        embed_model=embed_cfg.get("model", ""),
    )


def apply_overrides(cfg: PipelineConfig, **overrides) -> PipelineConfig:
    """Command-line flag overrides; None values leave the config untouched."""
    clean = {k: v for k, v in overrides.items() if v is not None}
    if not clean:
        return cfg
    completion_fields = {"model", "endpoint", "max_in_flight"}
    comp_over = {k: clean.pop(k) for k in list(clean) if k in completion_fields}
    if comp_over:
        cfg = replace(cfg, completion=replace(cfg.completion, **comp_over))
    if "regime" in clean:
        clean["regime"] = PromptRegime(clean["regime"])
    if "output_dir" in clean:
        clean["output_dir"] = Path(clean["output_dir"])
    return replace(cfg, **clean)
