"""Wave-to-wave change analysis and instruction-tuning data export."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from .cohort import Entry
from .errors import ConfigError, PreconditionError, SchemaError
from .llm import ParseKind, Prediction
from .prompts import (
    PersonaContext,
    PromptRegime,
    build_base_prompt,
    display_answer,
    instruction_text,
)
from .survey import Question

CellKey = tuple[str, str]  # (cohort slug, question id)


@dataclass(frozen=True)
class CohortChange:
    cohort: str
    changed: int
    shared: int

    @property
    def frac(self) -> float:
        return self.changed / self.shared


def change_fractions(
    prev: Mapping[CellKey, str], curr: Mapping[CellKey, str]
) -> dict[str, CohortChange]:
    """Per-cohort fraction of shared cells whose answer differs between maps.

    Cells present in only one map are ignored; a cohort with no shared cells
    does not appear in the result.
    """
    changed: dict[str, int] = {}
    shared: dict[str, int] = {}
    for key, prev_label in prev.items():
        curr_label = curr.get(key)
        if curr_label is None:
            continue
        cohort = key[0]
        shared[cohort] = shared.get(cohort, 0) + 1
        if curr_label != prev_label:
            changed[cohort] = changed.get(cohort, 0) + 1
    return {
        cohort: CohortChange(cohort=cohort, changed=changed.get(cohort, 0), shared=n)
        for cohort, n in shared.items()
    }


@dataclass(frozen=True)
class GroupChange:
    cohort: str
    n_cells: int
    observed_frac: float
    predicted_frac: float | None
    n_predicted_cells: int
    n_missing_pred: int


def group_change(
    entries: Sequence[Entry], predictions: Sequence[Prediction]
) -> list[GroupChange]:
    """Observed vs predicted answer-change fractions per cohort.

    Observed compares each entry's earlier answer with its gold target;
    predicted compares the earlier answer with the model's parsed answer.
    Refusals and unparseable responses drop out of the predicted fraction
    and are counted as missing; a cohort with no usable prediction keeps
    predicted_frac None so it can be flagged rather than silently scored.
    """
    if not entries:
        raise PreconditionError("no entries to analyse")
    by_key = {p.entry_key: p for p in predictions}
    missing = [e.key_str() for e in entries if e.key_str() not in by_key]
    if missing:
        raise SchemaError(f"{len(missing)} entries lack predictions (first: {missing[0]})")

    prev_map: dict[CellKey, str] = {}
    gold_map: dict[CellKey, str] = {}
    pred_map: dict[CellKey, str] = {}
    missing_pred: dict[str, int] = {}
    for entry in entries:
        cell = (entry.cohort_key.slug(), entry.question_id)
        prev_map[cell] = entry.prev_label
        gold_map[cell] = entry.gold_label
        parsed = by_key[entry.key_str()].parsed
        if parsed.kind is ParseKind.ANSWER:
            pred_map[cell] = parsed.label
        else:
            missing_pred[cell[0]] = missing_pred.get(cell[0], 0) + 1

    observed = change_fractions(prev_map, gold_map)
    predicted = change_fractions(prev_map, pred_map)
    out = []
    for cohort in sorted(observed):
        obs = observed[cohort]
        pred = predicted.get(cohort)
        out.append(
            GroupChange(
                cohort=cohort,
                n_cells=obs.shared,
                observed_frac=obs.frac,
                predicted_frac=None if pred is None else pred.frac,
                n_predicted_cells=0 if pred is None else pred.shared,
                n_missing_pred=missing_pred.get(cohort, 0),
            )
        )
    return out


@dataclass(frozen=True)
class VolatilityReport:
    """Cohorts ranked by how much their answers actually moved."""

    rows: tuple[GroupChange, ...]

    @property
    def max_shift(self) -> GroupChange:
        return self.rows[0]


def volatility_report(changes: Sequence[GroupChange]) -> VolatilityReport:
    if not changes:
        raise PreconditionError("no cohort changes to rank")
    rows = tuple(sorted(changes, key=lambda c: (-c.observed_frac, c.cohort)))
    return VolatilityReport(rows=rows)


def group_changes_to_csv(changes: Sequence[GroupChange]) -> str:
    """CSV of per-cohort observed vs predicted change (scatter-plot data)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["cohort", "n_cells", "observed_frac", "predicted_frac", "n_predicted_cells",
         "n_missing_pred"]
    )
    for c in changes:
        writer.writerow(
            [
                c.cohort,
                c.n_cells,
                f"{c.observed_frac:.6f}",
                "" if c.predicted_frac is None else f"{c.predicted_frac:.6f}",
                c.n_predicted_cells,
                c.n_missing_pred,
            ]
        )
    return out.getvalue()


def export_training_data(
    entries: Sequence[Entry],
    catalog: Mapping[str, Question],
    regime: PromptRegime = PromptRegime.TRAJECTORY,
    impact_sections: Mapping[str, str] | None = None,
) -> list[dict]:
    """Instruction-tuning records: one {instruction, input, output} per entry.

    The instruction is the persona block; the input is the rest of the
    rendered prompt; the output is the gold answer in its displayed form.
    Event-aware export needs a precomputed impact section per entry key.
    """
    if not entries:
        raise PreconditionError("no entries to export")
    records = []
    for entry in entries:
        question = catalog.get(entry.question_id)
        if question is None:
            raise PreconditionError(f"catalog has no entry for question {entry.question_id!r}")
        persona = PersonaContext(
            country=entry.country, target_year=entry.target_year, key=entry.cohort_key
        )
        history = None if regime is PromptRegime.VANILLA else [(entry.prev_year, entry.prev_label)]
        bundle = build_base_prompt(persona, question, history=history)
        rendered = bundle.rendered
        if regime is PromptRegime.EVENT_AWARE:
            if impact_sections is None:
                raise ConfigError(
                    "event-aware export needs an impact section per entry key"
                )
            section = impact_sections.get(entry.key_str())
            if section is None:
                raise ConfigError(f"no impact section for entry {entry.key_str()}")
            head, _, predict_line = rendered.rpartition("\n")
            rendered = f"{head}\n{section}{predict_line}"
        instruction = instruction_text(persona)
        prompt_input = rendered.removeprefix(instruction + "\n\n")
        displayed = display_answer(question, entry.gold_label)
        output = f"({displayed})" if len(displayed) == 1 and displayed.isalpha() else displayed
        records.append({"instruction": instruction, "input": prompt_input, "output": output})
    return records


def training_data_to_jsonl(records: Sequence[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)
