"""Prompt assembly from template files, and impact-rating response parsing.

Prompt layout lives in ``templates/*.txt`` so reviewers can read and edit the
exact text sent to models without touching code.  Three regimes build on each
other byte-for-byte: vanilla (persona + question), trajectory (adds the
historical answer block), and event-aware (splices an event impact section
between history and the prediction line).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Sequence

from .cohort import DemographicKey
from .errors import ContractError, ImpactParseError, PreconditionError
from .events import Event
from .survey import Question, QuestionType
from .taxonomy import AGE_RANGES, AgeBucket, Country, Education, Income, Sex


class PromptRegime(str, Enum):
    VANILLA = "vanilla"
    TRAJECTORY = "trajectory"
    EVENT_AWARE = "event-aware"


class ImpactLevel(str, Enum):
    NONE = "None"
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"


@dataclass(frozen=True)
class ImpactRecord:
    event_id: str
    level: ImpactLevel
    rationale: str
    defaulted: bool = False


@dataclass(frozen=True)
class PersonaContext:
    country: Country
    target_year: int
    key: DemographicKey

    @property
    def language(self) -> str:
        return self.country.language


@dataclass(frozen=True)
class PromptBundle:
    regime: PromptRegime
    persona: PersonaContext
    question_id: str
    rendered: str
    history: tuple[tuple[int, str], ...] | None = None
    impact_summary: str | None = None


@lru_cache(maxsize=None)
def _template(language: str, name: str) -> str:
    if language not in ("en", "zh"):
        raise PreconditionError(f"no templates for language {language!r}")
    text = resources.files("valuesim.templates").joinpath(f"{language}_{name}.txt").read_text(
        "utf-8"
    )
    # Files end with a POSIX trailing newline that is not part of the template.
    return text[:-1] if text.endswith("\n") else text


_ZH_SEX = {Sex.MALE: "男性", Sex.FEMALE: "女性"}
_ZH_BUCKET = {
    AgeBucket.YOUNG: "青年",
    AgeBucket.MIDDLE_AGE: "中年",
    AgeBucket.YOUNG_OLD: "准老年",
}
_ZH_EDUCATION = {Education.HIGHER: "高等", Education.MIDDLE: "中等", Education.LOWER: "初等"}
_ZH_INCOME = {Income.HIGH: "高", Income.MEDIUM: "中等", Income.LOW: "低"}
_ZH_COUNTRY = {Country.CN: "中国", Country.US: "美国"}
_ZH_LEVEL = {
    ImpactLevel.NONE: "无",
    ImpactLevel.LOW: "低",
    ImpactLevel.MEDIUM: "中",
    ImpactLevel.HIGH: "高",
}


def _persona_fields(country: Country, key: DemographicKey, language: str) -> dict[str, str]:
    lo, hi = AGE_RANGES[key.age_bucket]
    if language == "zh":
        return {
            "country": _ZH_COUNTRY[country],
            "age_phrase": f"年龄在{lo}至{hi}岁之间的{_ZH_BUCKET[key.age_bucket]}{_ZH_SEX[key.sex]}",
            "education": _ZH_EDUCATION[key.education],
            "income": _ZH_INCOME[key.income],
        }
    return {
        "country": country.display_en,
        "age_phrase": f"{key.age_bucket.value} {key.sex.value.lower()} aged {lo} to {hi}",
        "education": key.education.value.lower(),
        "income": key.income.value.lower(),
    }


def _one_line(text: str) -> str:
    return " ".join(text.split())


def _letter(index: int) -> str:
    return chr(ord("A") + index)


def option_block(question: Question) -> str:
    """Render answer options: lettered for single-choice, verbatim for scales."""
    if question.qtype is QuestionType.SINGLE_CHOICE:
        if len(question.options) > 26:
            raise ContractError(
                f"question {question.id!r} has {len(question.options)} options; letters run out"
            )
        return "\n".join(f"({_letter(i)}) {o.text}" for i, o in enumerate(question.options))
    return "\n".join(o.text for o in question.options)


def display_answer(question: Question, label: str) -> str:
    """How a stored answer label appears in prompt text.

    Single-choice answers show as their option letter, scale answers as the
    numeric option text.
    """
    try:
        idx = question.option_index(label)
    except KeyError:
        raise ContractError(
            f"label {label!r} is not an option of question {question.id!r}"
        ) from None
    if question.qtype is QuestionType.SINGLE_CHOICE:
        return _letter(idx)
    return question.options[idx].text


def instruction_text(persona: PersonaContext) -> str:
    """The persona block that opens every prompt."""
    lang = persona.language
    return _template(lang, "instruction").format(
        year=persona.target_year, **_persona_fields(persona.country, persona.key, lang)
    )


def build_base_prompt(
    persona: PersonaContext,
    question: Question,
    history: Sequence[tuple[int, str]] | None = None,
) -> PromptBundle:
    """Vanilla prompt, or the trajectory form when history pairs are given.

    History items are (year, answer_label) with labels validated against the
    question's options.
    """
    if question.country != persona.country:
        raise ContractError(
            f"question {question.id!r} is for {question.country.value}, "
            f"persona is in {persona.country.value}"
        )
    lang = persona.language
    vanilla = f"{instruction_text(persona)}\n\n{question.text}\n\n{option_block(question)}"
    if not history:
        return PromptBundle(
            regime=PromptRegime.VANILLA,
            persona=persona,
            question_id=question.id,
            rendered=vanilla,
        )
    line_tpl = _template(lang, "history_line")
    lines = "".join(
        line_tpl.format(year=year, answer=display_answer(question, label)) + "\n"
        for year, label in history
    )
    trajectory = _template(lang, "trajectory").format(
        history_lines=lines, impact_section="", year=persona.target_year
    )
    return PromptBundle(
        regime=PromptRegime.TRAJECTORY,
        persona=persona,
        question_id=question.id,
        rendered=f"{vanilla}\n\n{trajectory}",
        history=tuple(history),
    )


def impact_section(
    impacts: Sequence[ImpactRecord], events: Sequence[Event], language: str
) -> str:
    """Human-readable impact block; collapses to a no-influence note when
    every rating is None.  Always ends with a newline."""
    if not impacts:
        raise PreconditionError("impact section needs at least one record")
    titles = {e.id: e.title for e in events}
    unknown = [r.event_id for r in impacts if r.event_id not in titles]
    if unknown:
        raise ContractError(f"impact records reference unknown events: {', '.join(unknown)}")
    if all(r.level is ImpactLevel.NONE for r in impacts):
        lines = _template(language, "impact_none") + "\n"
    else:
        line_tpl = _template(language, "impact_line")
        none_note = "无明显影响" if language == "zh" else "no relevant influence"
        parts = []
        for r in impacts:
            level = _ZH_LEVEL[r.level] if language == "zh" else r.level.value
            rationale = _one_line(r.rationale) or none_note
            parts.append(
                line_tpl.format(title=titles[r.event_id], level=level, rationale=rationale) + "\n"
            )
        lines = "".join(parts)
    return _template(language, "impact_section").format(impact_lines=lines)


def build_eap_prompt(
    base: PromptBundle, impacts: Sequence[ImpactRecord], events: Sequence[Event]
) -> PromptBundle:
    """Upgrade a trajectory prompt to event-aware form.

    The impact section is spliced immediately before the final prediction
    line, so the trajectory text is preserved byte-for-byte.
    """
    if base.regime is not PromptRegime.TRAJECTORY:
        raise PreconditionError(f"can only add impacts to a trajectory prompt, got {base.regime.value}")
    section = impact_section(impacts, events, base.persona.language)
    head, _, predict_line = base.rendered.rpartition("\n")
    rendered = f"{head}\n{section}{predict_line}"
    return replace(
        base, regime=PromptRegime.EVENT_AWARE, rendered=rendered, impact_summary=section
    )


def build_impact_prompt(
    persona: PersonaContext,
    question: Question,
    prev_year: int,
    events: Sequence[Event],
) -> str:
    """The event-rating request sent before an event-aware answer prompt."""
    if not events:
        raise PreconditionError("impact prompt needs at least one event")
    event_lines = "".join(
        f"- [{e.id}] {e.title} ({e.date.isoformat()}): {_one_line(e.description)}\n"
        for e in events
    )
    lang = persona.language
    return _template(lang, "impact_prompt").format(
        question=question.text,
        prev_year=prev_year,
        target_year=persona.target_year,
        event_lines=event_lines,
        **_persona_fields(persona.country, persona.key, lang),
    )


_IMPACT_LINE = re.compile(
    r"^\s*(?:[-*]\s*)?(?P<id>[^|\s]+)\s*\|\s*(?P<level>none|low|medium|high)\s*\|\s*(?P<rationale>.*?)\s*$",
    re.IGNORECASE,
)
_IMPACT_MARKER = re.compile(r"impacts\s*:", re.IGNORECASE)


def parse_impact_response(text: str, expected_ids: Sequence[str]) -> list[ImpactRecord]:
    """Extract one impact record per expected event from a model response.

    Level tokens and surrounding whitespace are matched case-insensitively;
    lines for unknown events are ignored, the first line per event wins, and
    events the model skipped come back as defaulted None records.  A response
    with no parseable record at all raises ImpactParseError.
    """
    expected = list(dict.fromkeys(expected_ids))
    if not expected:
        raise PreconditionError("expected_ids must not be empty")
    marker = _IMPACT_MARKER.search(text)
    region = text[marker.end():] if marker else text
    found: dict[str, ImpactRecord] = {}
    for line in region.splitlines():
        m = _IMPACT_LINE.match(line)
        if not m:
            continue
        eid = m.group("id")
        if eid not in expected or eid in found:
            continue
        level = ImpactLevel(m.group("level").capitalize())
        rationale = m.group("rationale")
        if level is not ImpactLevel.NONE and not rationale:
            rationale = "unspecified"
        found[eid] = ImpactRecord(event_id=eid, level=level, rationale=rationale)
    if not found:
        raise ImpactParseError("response contains no parseable impact lines")
    records = list(found.values())
    for eid in sorted(set(expected) - set(found)):
        records.append(ImpactRecord(event_id=eid, level=ImpactLevel.NONE, rationale="", defaulted=True))
    return records
