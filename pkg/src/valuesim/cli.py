"""Command-line pipeline: ingest, stratify, match, prompt, simulate, score.

Each command reads its inputs, writes versioned artifacts under the output
directory, and prints a one-line summary.  Artifact directories are named by
a hash of the configuration slice that determines their content, so runs
with different settings can never silently mix.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

from . import __version__
from .analysis import (
    export_training_data,
    group_change,
    group_changes_to_csv,
    training_data_to_jsonl,
    volatility_report,
)
from .cohort import (
    Dataset,
    build_cohorts,
    cohort_to_dict,
    dataset_from_dict,
    dataset_to_dict,
    prune_groups,
    stage_datasets,
)
from .config import STAGES, PipelineConfig, apply_overrides, load_config
from .embeddings import CharHistogramProvider, FileVectorStore, HttpEmbeddingProvider
from .errors import (
    ConfigError,
    MissingArtifactError,
    ValuesimError,
    exit_code_for,
)
from .events import filter_event_years, load_events, serialize_events
from .llm import CannedBackend, HttpChatBackend, ScriptedMockBackend, prediction_from_dict
from .metrics import report_from_dict, report_to_dict, round2, score
from .prompts import PromptRegime, build_impact_prompt, PersonaContext
from .retrieval import STRATEGY_RANDOM, retrieval_to_dict, top_k_events
from .runner import (
    RunConfig,
    build_entry_prompt,
    canonical_json,
    effective_regime,
    retrieve_for_questions,
    run_simulation,
    write_run,
)
from .survey import (
    QuestionSplit,
    attach_questions,
    classify_questions,
    filter_responses,
    load_question_catalog,
    parse_survey_file,
    serialize_question_catalog,
    serialize_survey_file,
)
from .synth import write_fixture_tree
from .taxonomy import VALUE_DIMENSIONS, Country, parse_enum


def _slice_hash(slice_dict: dict) -> str:
    blob = json.dumps(slice_dict, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _read_bytes(path: Path, what: str) -> bytes:
    try:
        return path.read_bytes()
    except FileNotFoundError:
        raise ConfigError(f"{what} file not found: {path}") from None


def _artifact_dir(cfg: PipelineConfig, command: str, slice_dict: dict) -> Path:
    return cfg.output_dir / f"{command}-{_slice_hash(slice_dict)}"


def _require_dir(path: Path, producer: str) -> Path:
    if not path.is_dir():
        raise MissingArtifactError(f"missing artifact directory {path}", producer)
    return path


def _require_file(path: Path, producer: str) -> Path:
    if not path.is_file():
        raise MissingArtifactError(f"missing artifact {path}", producer)
    return path


# --- config slices (what identifies each command's output) -------------------

def _ingest_slice(cfg: PipelineConfig) -> dict:
    return {
        "command": "ingest",
        "country": cfg.country.value,
        "waves": {str(w): str(p) for w, p in sorted(cfg.wave_paths.items())},
        "catalog": str(cfg.catalog_path),
        "non_substantive": sorted(cfg.non_substantive),
    }


def _stratify_slice(cfg: PipelineConfig) -> dict:
    return {
        "command": "stratify",
        "ingest": _slice_hash(_ingest_slice(cfg)),
        "min_cohort_n": cfg.min_cohort_n,
    }


def _embed_slice(cfg: PipelineConfig) -> dict:
    return {
        "kind": cfg.embed_kind,
        "dim": cfg.embed_dim,
        "endpoint": cfg.embed_endpoint,
        "model": cfg.embed_model,
        "vectors": str(cfg.vectors_path) if cfg.vectors_path else "",
    }


def _match_slice(cfg: PipelineConfig) -> dict:
    return {
        "command": "match-events",
        "events": str(cfg.events_path) if cfg.events_path else "",
        "excluded_years": sorted(cfg.excluded_years) if cfg.excluded_years else "default",
        "k": cfg.event_k,
        "embed": _embed_slice(cfg),
    }


def _prompts_slice(cfg: PipelineConfig) -> dict:
    return {
        "command": "build-prompts",
        "stratify": _slice_hash(_stratify_slice(cfg)),
        "stage": cfg.stage,
        "regime": cfg.regime.value,
        "ablation": cfg.ablation,
        "event_k": cfg.event_k,
        "event_strategy": cfg.event_strategy,
        "seed": cfg.seed,
        "match": _match_slice(cfg),
    }


def _export_slice(cfg: PipelineConfig) -> dict:
    return {
        "command": "export-train",
        "stratify": _slice_hash(_stratify_slice(cfg)),
        "stage": cfg.stage,
        "regime": cfg.regime.value,
    }


# --- shared loading steps -----------------------------------------------------

def _load_catalog_from(path: Path):
    return load_question_catalog(_read_bytes(path, "catalog"))


def _survey_format(path: Path) -> str:
    return "csv" if path.suffix.lower() == ".csv" else "jsonl"


def _load_ingest_artifacts(cfg: PipelineConfig):
    ingest_dir = _require_dir(_artifact_dir(cfg, "ingest", _ingest_slice(cfg)), "ingest")
    catalog = _load_catalog_from(_require_file(ingest_dir / "catalog.json", "ingest"))
    waves = {}
    for w in (5, 6, 7):
        raw = _require_file(ingest_dir / f"wave{w}.jsonl", "ingest").read_bytes()
        waves[w] = attach_questions(parse_survey_file(raw, "jsonl"), catalog)
    split_raw = json.loads(_require_file(ingest_dir / "split.json", "ingest").read_text("utf-8"))
    split = QuestionSplit(
        country=parse_enum(Country, split_raw["country"], "country"),
        seen=tuple(split_raw["seen"]),
        unseen=tuple(split_raw["unseen"]),
    )
    return ingest_dir, waves, catalog, split


def _load_stage_dataset(cfg: PipelineConfig) -> tuple[Path, Dataset, dict]:
    stratify_dir = _require_dir(
        _artifact_dir(cfg, "stratify", _stratify_slice(cfg)), "stratify"
    )
    ds_file = _require_file(stratify_dir / f"dataset_{cfg.stage}.json", "stratify")
    dataset = dataset_from_dict(json.loads(ds_file.read_text("utf-8")))
    ingest_dir = _require_dir(_artifact_dir(cfg, "ingest", _ingest_slice(cfg)), "ingest")
    catalog = _load_catalog_from(_require_file(ingest_dir / "catalog.json", "ingest"))
    return stratify_dir, dataset, catalog


def _load_event_pool(cfg: PipelineConfig):
    if cfg.events_path is None:
        raise ConfigError("paths.events is required for event-aware operation")
    pool = load_events(_read_bytes(cfg.events_path, "events"))
    if pool.country != cfg.country:
        raise ConfigError(
            f"event pool is for {pool.country.value}, config says {cfg.country.value}"
        )
    return filter_event_years(pool, cfg.excluded_years)


def _make_embed_provider(cfg: PipelineConfig):
    if cfg.embed_kind == "mock":
        return CharHistogramProvider(dim=cfg.embed_dim)
    if cfg.embed_kind == "file":
        if cfg.vectors_path is None:
            raise ConfigError("embeddings.kind=file needs paths.vectors")
        return FileVectorStore.from_path(cfg.vectors_path)
    return HttpEmbeddingProvider(
        endpoint=cfg.embed_endpoint,
        model=cfg.embed_model,
        timeout=cfg.completion.timeout_s,
        max_retries=cfg.completion.max_retries,
    )


def _make_backend(cfg: PipelineConfig):
    if cfg.backend_kind == "mock":
        return ScriptedMockBackend(seed=cfg.seed)
    if cfg.backend_kind == "canned":
        if cfg.canned_path is None:
            raise ConfigError("backend.kind=canned needs paths.canned")
        return CannedBackend.from_jsonl(_read_bytes(cfg.canned_path, "canned responses"))
    return HttpChatBackend(cfg.completion)


def _run_config(cfg: PipelineConfig) -> RunConfig:
    return RunConfig(
        regime=cfg.regime,
        ablation=cfg.ablation,
        event_k=cfg.event_k,
        event_strategy=cfg.event_strategy,
        seed=cfg.seed,
        completion=cfg.completion,
    )


# --- commands -----------------------------------------------------------------

def cmd_ingest(cfg: PipelineConfig) -> int:
    catalog = _load_catalog_from(cfg.catalog_path)
    waves = {}
    dropped = 0
    removed_responses = 0
    for w, path in sorted(cfg.wave_paths.items()):
        wave = parse_survey_file(_read_bytes(path, f"wave{w}"), _survey_format(path))
        if wave.wave_id != w:
            raise ConfigError(f"{path} contains wave {wave.wave_id}, expected wave {w}")
        if wave.country != cfg.country:
            raise ConfigError(
                f"{path} is for {wave.country.value}, config says {cfg.country.value}"
            )
        wave = attach_questions(wave, catalog)
        filtered = filter_responses(wave, cfg.non_substantive)
        dropped += wave.dropped_respondents
        removed_responses += len(wave.responses) - len(filtered.responses)
        waves[w] = filtered
    split = classify_questions(waves.values())

    out = _artifact_dir(cfg, "ingest", _ingest_slice(cfg))
    out.mkdir(parents=True, exist_ok=True)
    for w, wave in sorted(waves.items()):
        (out / f"wave{w}.jsonl").write_text(serialize_survey_file(wave), encoding="utf-8")
    (out / "catalog.json").write_text(serialize_question_catalog(catalog), encoding="utf-8")
    (out / "split.json").write_text(
        canonical_json(
            {"country": split.country.value, "seen": list(split.seen), "unseen": list(split.unseen)}
        ),
        encoding="utf-8",
    )
    (out / "ingest_summary.json").write_text(
        canonical_json(
            {
                "responses_kept": sum(len(w.responses) for w in waves.values()),
                "responses_removed_non_substantive": removed_responses,
                "respondents_dropped_incomplete": dropped,
                "seen_questions": len(split.seen),
                "unseen_questions": len(split.unseen),
            }
        ),
        encoding="utf-8",
    )
    print(
        f"ingest: waves 5/6/7 ok, {len(split.seen)} seen + {len(split.unseen)} unseen "
        f"questions, {removed_responses} non-substantive responses removed, "
        f"{dropped} incomplete respondents dropped -> {out}"
    )
    return 0


def cmd_stratify(cfg: PipelineConfig) -> int:
    _, waves, catalog, split = _load_ingest_artifacts(cfg)
    cohorts = build_cohorts(waves.values())
    pruned = prune_groups(cohorts, min_n=cfg.min_cohort_n)
    datasets = stage_datasets(pruned, split, catalog)

    out = _artifact_dir(cfg, "stratify", _stratify_slice(cfg))
    out.mkdir(parents=True, exist_ok=True)
    (out / "cohorts.json").write_text(
        canonical_json([cohort_to_dict(c) for c in pruned]), encoding="utf-8"
    )
    for stage, ds in datasets.items():
        (out / f"dataset_{stage}.json").write_text(
            canonical_json(dataset_to_dict(ds)), encoding="utf-8"
        )
    (out / "stratify_summary.json").write_text(
        canonical_json(
            {
                "cohorts_before_pruning": len(cohorts),
                "cohorts": len(pruned),
                "min_cohort_n": cfg.min_cohort_n,
                "entries": {stage: len(ds.entries) for stage, ds in datasets.items()},
                "skipped": {
                    stage: {
                        "missing_prev": ds.skipped_missing_prev,
                        "missing_gold": ds.skipped_missing_gold,
                    }
                    for stage, ds in datasets.items()
                },
            }
        ),
        encoding="utf-8",
    )
    counts = "/".join(str(len(datasets[s].entries)) for s in STAGES)
    print(
        f"stratify: {len(pruned)} cohorts (of {len(cohorts)} cells, min n {cfg.min_cohort_n}), "
        f"entries train/test1/test2 {counts} -> {out}"
    )
    return 0


def cmd_match_events(cfg: PipelineConfig) -> int:
    pool, removed = _load_event_pool(cfg)
    provider = _make_embed_provider(cfg)
    results = [top_k_events(dim, pool, cfg.event_k, provider) for dim in VALUE_DIMENSIONS]

    out = _artifact_dir(cfg, "match-events", _match_slice(cfg))
    out.mkdir(parents=True, exist_ok=True)
    (out / "retrieval.json").write_text(
        canonical_json(
            {
                "k": cfg.event_k,
                "pool_size": len(pool.events),
                "excluded_years": sorted(pool.excluded_years),
                "events_removed": removed,
                "provider": provider.provider_tag,
                "dimensions": [retrieval_to_dict(r) for r in results],
            }
        ),
        encoding="utf-8",
    )
    (out / "events_kept.jsonl").write_text(serialize_events(pool), encoding="utf-8")
    print(
        f"match-events: {len(pool.events)} events after excluding "
        f"{sorted(pool.excluded_years)} ({removed} removed), top-{cfg.event_k} for "
        f"{len(results)} value themes -> {out}"
    )
    return 0


def cmd_build_prompts(cfg: PipelineConfig) -> int:
    _, dataset, catalog = _load_stage_dataset(cfg)
    rc = _run_config(cfg)
    regime = effective_regime(rc)
    out = _artifact_dir(cfg, "build-prompts", _prompts_slice(cfg))
    out.mkdir(parents=True, exist_ok=True)

    lines = []
    for entry in dataset.entries:
        bundle = build_entry_prompt(entry, catalog[entry.question_id], regime)
        lines.append(
            json.dumps(
                {"entry_key": entry.key_str(), "regime": bundle.regime.value,
                 "prompt": bundle.rendered},
                ensure_ascii=False,
            )
        )
    (out / "prompts.jsonl").write_text("".join(l + "\n" for l in lines), encoding="utf-8")

    n_impact = 0
    if regime is PromptRegime.EVENT_AWARE:
        pool, _ = _load_event_pool(cfg)
        provider = None
        if cfg.event_strategy != STRATEGY_RANDOM:
            provider = _make_embed_provider(cfg)
        questions = {e.question_id: catalog[e.question_id] for e in dataset.entries}
        retrievals = retrieve_for_questions(rc, list(questions.values()), pool, provider)
        events_by_id = {e.id: e for e in pool.events}
        impact_lines = []
        for entry in dataset.entries:
            events = [events_by_id[eid] for eid in retrievals[entry.question_id].event_ids()]
            persona = PersonaContext(
                country=entry.country, target_year=entry.target_year, key=entry.cohort_key
            )
            prompt = build_impact_prompt(
                persona, catalog[entry.question_id], entry.prev_year, events
            )
            impact_lines.append(
                json.dumps({"entry_key": entry.key_str(), "prompt": prompt}, ensure_ascii=False)
            )
        (out / "impact_prompts.jsonl").write_text(
            "".join(l + "\n" for l in impact_lines), encoding="utf-8"
        )
        n_impact = len(impact_lines)

    note = f" + {n_impact} impact prompts" if n_impact else ""
    print(
        f"build-prompts[{cfg.stage}]: {len(dataset.entries)} {regime.value} prompts{note} -> {out}"
    )
    return 0


def cmd_simulate(cfg: PipelineConfig) -> int:
    stratify_dir, dataset, catalog = _load_stage_dataset(cfg)
    rc = _run_config(cfg)
    regime = effective_regime(rc)
    pool = provider = None
    if regime is PromptRegime.EVENT_AWARE:
        pool, _ = _load_event_pool(cfg)
        if cfg.event_strategy != STRATEGY_RANDOM:
            provider = _make_embed_provider(cfg)
    backend = _make_backend(cfg)
    inputs = {
        "stage": cfg.stage,
        "stratify": _slice_hash(_stratify_slice(cfg)),
        "events": str(cfg.events_path) if pool is not None else "",
    }
    result = run_simulation(
        rc, dataset, catalog, backend, pool=pool, embed_provider=provider, inputs=inputs
    )
    run_dir = write_run(result, cfg.output_dir)
    r = result.report
    print(
        f"simulate[{cfg.stage}]: {len(dataset.entries)} entries via {backend.name}, "
        f"EM {round2(r.em_pct)} PS {round2(r.ps_pct)} overall {round2(r.overall_pct)}, "
        f"{r.refusals} refusals, {r.unparseable} unparseable -> {run_dir}"
    )
    return 0


def _load_predictions_file(path: Path):
    preds = []
    for ln in path.read_text(encoding="utf-8").splitlines():
        if ln.strip():
            preds.append(prediction_from_dict(json.loads(ln)))
    return preds


def _resolve_run_dir(cfg: PipelineConfig, run_arg: str | None) -> Path:
    if run_arg:
        return _require_dir(Path(run_arg), "simulate")
    runs = sorted(cfg.output_dir.glob("run-*"))
    if not runs:
        raise MissingArtifactError(f"no run directories under {cfg.output_dir}", "simulate")
    if len(runs) > 1:
        raise ConfigError(
            f"multiple run directories under {cfg.output_dir}; pass --run explicitly"
        )
    return runs[0]


def cmd_evaluate(cfg: PipelineConfig, run_arg: str | None, predictions_arg: str | None) -> int:
    _, dataset, catalog = _load_stage_dataset(cfg)
    if predictions_arg:
        pred_path = Path(predictions_arg)
        if not pred_path.is_file():
            raise ConfigError(f"predictions file not found: {pred_path}")
        out_dir = pred_path.parent
    else:
        run_dir = _resolve_run_dir(cfg, run_arg)
        pred_path = _require_file(run_dir / "predictions.jsonl", "simulate")
        out_dir = run_dir
    predictions = _load_predictions_file(pred_path)
    report = score(dataset.entries, predictions, catalog)
    blob = canonical_json(report_to_dict(report))
    (out_dir / "evaluation.json").write_text(blob, encoding="utf-8")

    verdict = ""
    stored = pred_path.parent / "report.json"
    if stored.is_file():
        match = json.loads(stored.read_text("utf-8")) == report_to_dict(report)
        verdict = ", matches stored report" if match else ", MISMATCH with stored report"
    print(
        f"evaluate[{cfg.stage}]: {len(dataset.entries)} entries, "
        f"EM {round2(report.em_pct)} PS {round2(report.ps_pct)} "
        f"overall {round2(report.overall_pct)}{verdict} -> {out_dir / 'evaluation.json'}"
    )
    return 0


def cmd_report(cfg: PipelineConfig, run_arg: str | None) -> int:
    run_dir = _resolve_run_dir(cfg, run_arg)
    _, dataset, catalog = _load_stage_dataset(cfg)
    predictions = _load_predictions_file(_require_file(run_dir / "predictions.jsonl", "simulate"))
    manifest = json.loads(_require_file(run_dir / "manifest.json", "simulate").read_text("utf-8"))
    report = report_from_dict(
        json.loads(_require_file(run_dir / "report.json", "simulate").read_text("utf-8"))
    )

    changes = group_change(dataset.entries, predictions)
    ranked = volatility_report(changes)
    (run_dir / "group_changes.csv").write_text(
        group_changes_to_csv(ranked.rows), encoding="utf-8"
    )

    conf = manifest.get("config", {})
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["country", "stage", "regime", "ablation", "event_strategy", "event_k", "seed",
         "model", "n_single", "n_scale", "em_pct", "ps_pct", "overall_pct",
         "refusals", "unparseable"]
    )
    writer.writerow(
        [conf.get("country"), cfg.stage, conf.get("regime"), conf.get("ablation"),
         conf.get("event_strategy"), conf.get("event_k"), conf.get("seed"),
         conf.get("model"), report.n_single, report.n_scale, round2(report.em_pct),
         round2(report.ps_pct), round2(report.overall_pct), report.refusals,
         report.unparseable]
    )
    (run_dir / "summary.csv").write_text(out.getvalue(), encoding="utf-8")

    top = ranked.max_shift
    print(
        f"report[{cfg.stage}]: overall {round2(report.overall_pct)}, "
        f"most volatile cohort {top.cohort} (observed {top.observed_frac:.3f} over "
        f"{top.n_cells} cells) -> {run_dir / 'summary.csv'}, {run_dir / 'group_changes.csv'}"
    )
    return 0


def cmd_export_train(cfg: PipelineConfig) -> int:
    _, dataset, catalog = _load_stage_dataset(cfg)
    if cfg.regime is PromptRegime.EVENT_AWARE:
        raise ConfigError(
            "export-train supports the vanilla and trajectory regimes; event-aware "
            "records need impact sections from a simulation"
        )
    records = export_training_data(dataset.entries, catalog, regime=cfg.regime)
    out = _artifact_dir(cfg, "export-train", _export_slice(cfg))
    out.mkdir(parents=True, exist_ok=True)
    (out / "train.jsonl").write_text(training_data_to_jsonl(records), encoding="utf-8")
    print(
        f"export-train[{cfg.stage}]: {len(records)} {cfg.regime.value} records -> "
        f"{out / 'train.jsonl'}"
    )
    return 0


def cmd_synth(args) -> int:
    country = parse_enum(Country, args.country, "country")
    out = Path(args.output)
    spec = None
    if args.reference_sizes:
        from .synth import reference_cohort_spec

        spec = reference_cohort_spec(country)
    paths = write_fixture_tree(
        out, country, seed=args.seed, cohort_spec=spec, n_events=args.events
    )
    config = {
        "country": country.value,
        "paths": {
            "wave5": paths["wave5"].name,
            "wave6": paths["wave6"].name,
            "wave7": paths["wave7"].name,
            "catalog": paths["catalog"].name,
            "events": paths["events"].name,
            "output": "out",
        },
        "stage": "test1",
        "regime": "event-aware",
        "events": {"k": 3, "strategy": "value"},
        "min_cohort_n": 5,
        "seed": args.seed,
        "backend": {"kind": "mock"},
        "embeddings": {"kind": "mock", "dim": 64},
    }
    config_path = out / "config.json"
    config_path.write_text(canonical_json(config), encoding="utf-8")
    print(
        f"synth: {country.value} fixture (3 waves, catalog, events) + config -> {config_path}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="valuesim",
        description="Group-level survey answer simulation across waves",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, runs: bool = False):
        p.add_argument("--config", required=True, help="path to the pipeline config JSON")
        p.add_argument("--output", help="override the output directory")
        p.add_argument("--stage", choices=STAGES, help="dataset stage to operate on")
        p.add_argument("--seed", type=int, help="override the run seed")
        p.add_argument("--min-cohort-n", type=int, dest="min_cohort_n",
                       help="minimum per-wave cohort size")
        if runs:
            p.add_argument("--regime", choices=[r.value for r in PromptRegime],
                           help="prompt regime")
            p.add_argument("--ablation", choices=["full", "no-event", "no-history-event"],
                           help="ablation applied to the regime")
            p.add_argument("--event-k", type=int, dest="event_k",
                           help="events retrieved per question")
            p.add_argument("--event-strategy", choices=["value", "random", "direct"],
                           dest="event_strategy", help="event retrieval strategy")
            p.add_argument("--backend", choices=["mock", "http", "canned"],
                           dest="backend_kind", help="completion backend")
            p.add_argument("--model", help="model name sent to the backend")
            p.add_argument("--endpoint", help="completion endpoint URL")
            p.add_argument("--max-in-flight", type=int, dest="max_in_flight",
                           help="max concurrent backend requests")

    add_common(sub.add_parser("ingest", help="parse, filter and split the survey waves"))
    add_common(sub.add_parser("stratify", help="build cohorts and wave-pair datasets"))
    add_common(sub.add_parser("match-events", help="rank events against the value themes"),
               runs=True)
    add_common(sub.add_parser("build-prompts", help="render prompts without calling a model"),
               runs=True)
    add_common(sub.add_parser("simulate", help="predict every entry and score the run"),
               runs=True)

    p_eval = sub.add_parser("evaluate", help="recompute metrics from stored predictions")
    add_common(p_eval)
    p_eval.add_argument("--run", help="run directory (default: the only run in output)")
    p_eval.add_argument("--predictions", help="score a bare predictions JSONL file")

    p_report = sub.add_parser("report", help="summaries and change analysis for a run")
    add_common(p_report)
    p_report.add_argument("--run", help="run directory (default: the only run in output)")

    p_export = sub.add_parser("export-train", help="write instruction-tuning JSONL")
    add_common(p_export, runs=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic fixture tree")
    p_synth.add_argument("--country", required=True, choices=[c.value for c in Country])
    p_synth.add_argument("--output", required=True, help="fixture directory to create")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--events", type=int, default=None,
                         help="event pool size (default: reference size)")
    p_synth.add_argument("--reference-sizes", action="store_true",
                         help="use the real per-wave cohort sizes instead of small cells")
    return parser


def _config_from_args(args) -> PipelineConfig:
    cfg = load_config(args.config)
    overrides = {}
    for key in ("stage", "seed", "min_cohort_n", "regime", "ablation", "event_k",
                "event_strategy", "backend_kind", "model", "endpoint", "max_in_flight"):
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    if getattr(args, "output", None):
        overrides["output_dir"] = args.output
    return apply_overrides(cfg, **overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(args)
        cfg = _config_from_args(args)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "stratify":
            return cmd_stratify(cfg)
        if args.command == "match-events":
            return cmd_match_events(cfg)
        if args.command == "build-prompts":
            return cmd_build_prompts(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.run, args.predictions)
        if args.command == "report":
            return cmd_report(cfg, args.run)
        if args.command == "export-train":
            return cmd_export_train(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ValuesimError as e:
        print(f"error: {e}", file=sys.stderr)
        return exit_code_for(e)
    except Exception as e:  # pragma: no cover - last-resort guard
        print(f"unexpected error: {e!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
