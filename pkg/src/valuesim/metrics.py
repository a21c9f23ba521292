"""Scoring: exact match for single-choice, proximity credit for scales."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence

from .cohort import Entry
from .errors import ContractError, SchemaError, UndefinedMetricError
from .llm import ParseKind, Prediction
from .survey import Question, QuestionType

# A scale prediction loses a fifth of its credit per point of distance.
PROXIMITY_SPAN = 5
SCALE_LO, SCALE_HI = 1, 10


def exact_match(predictions: Sequence[Prediction], golds: Sequence[str]) -> float:
    """Percentage of predictions whose parsed label equals the gold label.

    Refusals and unparseable responses count as wrong.
    """
    if len(predictions) != len(golds):
        raise ContractError(f"{len(predictions)} predictions vs {len(golds)} golds")
    if not predictions:
        raise UndefinedMetricError("exact match over zero predictions")
    hits = sum(
        1
        for pred, gold in zip(predictions, golds)
        if pred.parsed.kind is ParseKind.ANSWER and pred.parsed.label == gold
    )
    return 100.0 * hits / len(predictions)


def proximity_credit(pred: int, gold: int) -> float:
    """Linearly decaying credit: 1 at distance 0, 0 at distance 5 and beyond."""
    for name, value in (("pred", pred), ("gold", gold)):
        if not SCALE_LO <= value <= SCALE_HI:
            raise ValueError(f"{name}={value} outside scale range [{SCALE_LO}, {SCALE_HI}]")
    return max(0.0, 1.0 - abs(pred - gold) / PROXIMITY_SPAN)


def overall(em_pct: float, ps_pct: float, n_single: int, n_scale: int) -> float:
    """Entry-weighted blend of the two metrics."""
    total = n_single + n_scale
    if total == 0:
        raise UndefinedMetricError("overall score over zero entries")
    return (n_single * em_pct + n_scale * ps_pct) / total


@dataclass(frozen=True)
class GroupScore:
    n_single: int
    n_scale: int
    em_pct: float
    ps_pct: float
    overall_pct: float


@dataclass(frozen=True)
class MetricsReport:
    n_single: int
    n_scale: int
    em_pct: float
    ps_pct: float
    overall_pct: float
    refusals: int
    unparseable: int
    per_group: Mapping[str, GroupScore] = field(default_factory=dict)


def _scale_value(question: Question, label: str) -> int:
    try:
        idx = question.option_index(label)
    except KeyError:
        raise ContractError(
            f"label {label!r} is not an option of question {question.id!r}"
        ) from None
    return int(question.options[idx].text.strip())


def _subscores(
    pairs: Sequence[tuple[Entry, Prediction]], catalog: Mapping[str, Question]
) -> GroupScore:
    singles = [(e, p) for e, p in pairs if e.qtype is QuestionType.SINGLE_CHOICE]
    scales = [(e, p) for e, p in pairs if e.qtype is QuestionType.SCALE]
    em = (
        exact_match([p for _, p in singles], [e.gold_label for e, _ in singles])
        if singles
        else 0.0
    )
    if scales:
        credits = []
        for entry, pred in scales:
            question = catalog[entry.question_id]
            if pred.parsed.kind is not ParseKind.ANSWER:
                credits.append(0.0)
                continue
            credits.append(
                proximity_credit(
                    _scale_value(question, pred.parsed.label),
                    _scale_value(question, entry.gold_label),
                )
            )
        ps = 100.0 * sum(credits) / len(credits)
    else:
        ps = 0.0
    total = overall(em, ps, len(singles), len(scales))
    return GroupScore(
        n_single=len(singles), n_scale=len(scales), em_pct=em, ps_pct=ps, overall_pct=total
    )


def score(
    entries: Sequence[Entry],
    predictions: Sequence[Prediction],
    catalog: Mapping[str, Question],
) -> MetricsReport:
    """Score a full run: corpus-level metrics plus a per-cohort breakdown.

    Predictions are matched to entries by key; any mismatch between the two
    sets is a schema error rather than a silent partial score.
    """
    if not entries:
        raise UndefinedMetricError("cannot score an empty dataset")
    by_key = {p.entry_key: p for p in predictions}
    if len(by_key) != len(predictions):
        raise SchemaError("predictions contain duplicate entry keys")
    missing = [e.key_str() for e in entries if e.key_str() not in by_key]
    if missing:
        raise SchemaError(
            f"{len(missing)} entr{'y' if len(missing) == 1 else 'ies'} lack predictions "
            f"(first: {missing[0]})"
        )
    extra = set(by_key) - {e.key_str() for e in entries}
    if extra:
        raise SchemaError(f"{len(extra)} predictions match no entry (first: {sorted(extra)[0]})")
    for entry in entries:
        if entry.question_id not in catalog:
            raise ContractError(f"catalog has no entry for question {entry.question_id!r}")

    pairs = [(e, by_key[e.key_str()]) for e in sorted(entries, key=lambda e: e.key())]
    corpus = _subscores(pairs, catalog)
    refusals = sum(1 for _, p in pairs if p.parsed.kind is ParseKind.REFUSAL)
    unparseable = sum(1 for _, p in pairs if p.parsed.kind is ParseKind.UNPARSEABLE)

    groups: dict[str, list[tuple[Entry, Prediction]]] = {}
    for entry, pred in pairs:
        groups.setdefault(entry.cohort_key.slug(), []).append((entry, pred))
    per_group = {slug: _subscores(members, catalog) for slug, members in groups.items()}

    return MetricsReport(
        n_single=corpus.n_single,
        n_scale=corpus.n_scale,
        em_pct=corpus.em_pct,
        ps_pct=corpus.ps_pct,
        overall_pct=corpus.overall_pct,
        refusals=refusals,
        unparseable=unparseable,
        per_group=per_group,
    )


def round2(value: float) -> float:
    """Half-up rounding to two decimals, applied only at serialization time."""
    return float(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def _group_to_dict(g: GroupScore) -> dict:
    return {
        "n_single": g.n_single,
        "n_scale": g.n_scale,
        "em_pct": round2(g.em_pct),
        "ps_pct": round2(g.ps_pct),
        "overall_pct": round2(g.overall_pct),
    }


def report_to_dict(report: MetricsReport) -> dict:
    return {
        "n_single": report.n_single,
        "n_scale": report.n_scale,
        "em_pct": round2(report.em_pct),
        "ps_pct": round2(report.ps_pct),
        "overall_pct": round2(report.overall_pct),
        "refusals": report.refusals,
        "unparseable": report.unparseable,
        "per_group": {
            slug: _group_to_dict(g) for slug, g in sorted(report.per_group.items())
        },
    }


def report_from_dict(rec: dict) -> MetricsReport:
    try:
        per_group = {
            slug: GroupScore(
                n_single=int(g["n_single"]),
                n_scale=int(g["n_scale"]),
                em_pct=float(g["em_pct"]),
                ps_pct=float(g["ps_pct"]),
                overall_pct=float(g["overall_pct"]),
            )
            for slug, g in rec.get("per_group", {}).items()
        }
        return MetricsReport(
            n_single=int(rec["n_single"]),
            n_scale=int(rec["n_scale"]),
            em_pct=float(rec["em_pct"]),
            ps_pct=float(rec["ps_pct"]),
            overall_pct=float(rec["overall_pct"]),
            refusals=int(rec["refusals"]),
            unparseable=int(rec["unparseable"]),
            per_group=per_group,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"malformed metrics report: {e}") from None
