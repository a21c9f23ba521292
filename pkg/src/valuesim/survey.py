"""Survey file ingestion: parsing, question catalogs, filtering, wave splits.

Survey responses arrive as JSONL (one record per line) or CSV with the same
field names as headers.  Question metadata lives in a separate catalog file
so response records stay small.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable

from .errors import ConfigError, ParseError, PreconditionError, SchemaError
from .taxonomy import (
    Country,
    Education,
    Income,
    Sex,
    ValueDimension,
    dimension_by_name,
    parse_enum,
)

# Labels treated as non-substantive, compared exactly after whitespace trim.
DEFAULT_NON_SUBSTANTIVE = frozenset({"No answer", "Don't know", "Refused"})


class QuestionType(str, Enum):
    SINGLE_CHOICE = "single-choice"
    SCALE = "scale"


@dataclass(frozen=True)
class Option:
    label: str
    text: str


@dataclass(frozen=True)
class Question:
    id: str
    country: Country
    text: str
    options: tuple[Option, ...]
    theme: ValueDimension
    qtype: QuestionType

    def option_index(self, label: str) -> int:
        for i, opt in enumerate(self.options):
            if opt.label == label:
                return i
        raise KeyError(label)

    def labels(self) -> tuple[str, ...]:
        return tuple(o.label for o in self.options)


@dataclass(frozen=True)
class Respondent:
    id: str
    sex: Sex
    age_years: int
    education: Education
    income: Income


@dataclass(frozen=True)
class Response:
    respondent_id: str
    question_id: str
    answer: str


@dataclass
class SurveyWave:
    wave_id: int
    country: Country
    year: int
    responses: list[Response] = field(default_factory=list)
    respondents: dict[str, Respondent] = field(default_factory=dict)
    questions: dict[str, Question] = field(default_factory=dict)
    question_ids: frozenset[str] = frozenset()
    dropped_respondents: int = 0


@dataclass(frozen=True)
class QuestionSplit:
    """Question ids partitioned by wave coverage.

    ``seen`` questions appear in all three waves; ``unseen`` appear in the
    two later waves only.
    """

    country: Country
    seen: tuple[str, ...]
    unseen: tuple[str, ...]


def detect_question_type(question: Question) -> QuestionType:
    """Classify by option texts: a consecutive ascending integer run is a scale.

    Anything else (non-numeric texts, gaps, fewer than two options) is
    single-choice.
    """
    return _classify_options(tuple(o.text for o in question.options))


def _classify_options(texts: tuple[str, ...]) -> QuestionType:
    if len(texts) < 2:
        return QuestionType.SINGLE_CHOICE
    values = []
    for t in texts:
        s = t.strip()
        if not s.isdigit() and not (s.startswith("-") and s[1:].isdigit()):
            return QuestionType.SINGLE_CHOICE
        values.append(int(s))
    for prev, curr in zip(values, values[1:]):
        if curr != prev + 1:
            return QuestionType.SINGLE_CHOICE
    return QuestionType.SCALE


def _question_from_dict(rec: dict, where: str) -> Question:
    try:
        qid = rec["id"]
        country = parse_enum(Country, rec["country"], "country")
        text = rec["text"]
        theme = dimension_by_name(rec["theme"])
        raw_options = rec["options"]
    except KeyError as e:
        raise SchemaError(f"{where}: question record missing key {e}") from None
    except ConfigError as e:
        raise SchemaError(f"{where}: {e}") from None
    if not isinstance(qid, str) or not qid:
        raise SchemaError(f"{where}: question id must be a non-empty string")
    if not isinstance(text, str) or not text:
        raise SchemaError(f"{where}: question {qid!r} has empty text")
    if not raw_options:
        raise SchemaError(f"{where}: question {qid!r} has no options")
    options = []
    seen_labels = set()
    for o in raw_options:
        try:
            label, otext = o["label"], o["text"]
        except (KeyError, TypeError):
            raise SchemaError(f"{where}: question {qid!r} has a malformed option") from None
        if label in seen_labels:
            raise SchemaError(f"{where}: question {qid!r} repeats option label {label!r}")
        seen_labels.add(label)
        options.append(Option(label=label, text=otext))
    opts = tuple(options)
    return Question(
        id=qid,
        country=country,
        text=text,
        options=opts,
        theme=theme,
        qtype=_classify_options(tuple(o.text for o in opts)),
    )


def load_question_catalog(raw: str | bytes) -> dict[str, Question]:
    """Load a catalog (JSON array of question records) keyed by question id.

    A question id appearing twice with identical content is deduplicated;
    conflicting content is a schema error.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        records = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ParseError(f"catalog is not valid JSON: {e}") from None
    if not isinstance(records, list):
        raise SchemaError("catalog must be a JSON array of question records")
    catalog: dict[str, Question] = {}
    for i, rec in enumerate(records):
        q = _question_from_dict(rec, f"catalog entry {i}")
        if q.id in catalog:
            if catalog[q.id] != q:
                raise SchemaError(f"catalog entry {i}: conflicting duplicate for question {q.id!r}")
            continue
        catalog[q.id] = q
    return catalog


def serialize_question_catalog(catalog: dict[str, Question]) -> str:
    """JSON array form of a catalog; load_question_catalog round-trips it."""
    records = []
    for qid in sorted(catalog):
        q = catalog[qid]
        records.append(
            {
                "id": q.id,
                "country": q.country.value,
                "text": q.text,
                "theme": q.theme.name,
                "options": [{"label": o.label, "text": o.text} for o in q.options],
            }
        )
    return json.dumps(records, ensure_ascii=False, indent=2) + "\n"


_DEMOGRAPHIC_FIELDS = ("sex", "age", "education", "income")


def _is_missing(value) -> bool:
    return value is None or (isinstance(value, str) and value.strip() == "")


def _parse_record(rec: dict, line: int) -> tuple[int, Country, int, str, dict, str, str]:
    for key in ("wave", "country", "year", "question_id", "answer"):
        if key not in rec:
            raise ParseError(f"missing field {key!r}", line)
    try:
        wave_id = int(rec["wave"])
        year = int(rec["year"])
    except (TypeError, ValueError):
        raise ParseError("wave and year must be integers", line) from None
    try:
        country = parse_enum(Country, rec["country"], "country")
    except ConfigError as e:
        raise ParseError(str(e), line) from None
    qid = rec["question_id"]
    if not isinstance(qid, str) or not qid:
        raise ParseError("question_id must be a non-empty string", line)
    answer = rec["answer"]
    if answer is None:
        answer = ""
    if not isinstance(answer, str):
        raise ParseError("answer must be a string", line)
    demo = rec.get("respondent")
    if not isinstance(demo, dict) or "id" not in demo:
        raise ParseError("respondent block must be an object with an id", line)
    rid = demo["id"]
    if not isinstance(rid, str) or not rid:
        raise ParseError("respondent id must be a non-empty string", line)
    return wave_id, country, year, rid, demo, qid, answer


def _respondent_from_demo(demo: dict, line: int) -> Respondent | None:
    """Build a Respondent, or None when any demographic field is missing."""
    for key in _DEMOGRAPHIC_FIELDS:
        if key not in demo:
            raise ParseError(f"respondent block missing field {key!r}", line)
    if any(_is_missing(demo[k]) for k in _DEMOGRAPHIC_FIELDS):
        return None
    age = demo["age"]
    if isinstance(age, str):
        if not age.strip().isdigit():
            raise ParseError(f"age must be a non-negative integer, got {age!r}", line)
        age = int(age.strip())
    if not isinstance(age, int) or isinstance(age, bool) or age < 0:
        raise ParseError(f"age must be a non-negative integer, got {age!r}", line)
    try:
        return Respondent(
            id=demo["id"],
            sex=parse_enum(Sex, demo["sex"], "sex"),
            age_years=age,
            education=parse_enum(Education, demo["education"], "education"),
            income=parse_enum(Income, demo["income"], "income"),
        )
    except ConfigError as e:
        raise ParseError(str(e), line) from None


def _csv_to_records(text: str) -> Iterable[tuple[int, dict]]:
    reader = csv.DictReader(io.StringIO(text))
    for i, row in enumerate(reader, start=2):  # header is line 1
        if None in row or any(v is None for v in row.values()):
            raise ParseError("wrong number of fields", i)
        rec = {
            "wave": row.get("wave"),
            "country": row.get("country"),
            "year": row.get("year"),
            "question_id": row.get("question_id"),
            "answer": row.get("answer"),
            "respondent": {
                "id": row.get("respondent_id"),
                "sex": row.get("sex"),
                "age": row.get("age"),
                "education": row.get("education"),
                "income": row.get("income"),
            },
        }
        yield i, rec


def parse_survey_file(raw: str | bytes, fmt: str = "jsonl") -> SurveyWave:
    """Parse one wave of responses from JSONL or CSV content.

    All answer labels are retained verbatim (non-substantive filtering is a
    separate step).  Respondents with any missing demographic field are
    dropped entirely along with their responses; the count is recorded on
    the returned wave.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    if fmt == "jsonl":
        pairs = []
        for i, ln in enumerate(raw.splitlines(), start=1):
            if not ln.strip():
                continue
            try:
                rec = json.loads(ln)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON: {e.msg}", i) from None
            if not isinstance(rec, dict):
                raise ParseError("record must be a JSON object", i)
            pairs.append((i, rec))
    elif fmt == "csv":
        pairs = list(_csv_to_records(raw))
    else:
        raise ConfigError(f"unknown survey format {fmt!r} (expected jsonl or csv)")

    header: tuple[int, Country, int] | None = None
    respondents: dict[str, Respondent] = {}
    incomplete: set[str] = set()
    raw_responses: list[Response] = []
    question_ids: set[str] = set()

    for line, rec in pairs:
        wave_id, country, year, rid, demo, qid, answer = _parse_record(rec, line)
        if header is None:
            header = (wave_id, country, year)
        elif header != (wave_id, country, year):
            raise SchemaError(
                f"line {line}: wave/country/year {(wave_id, country.value, year)} "
                f"conflicts with {(header[0], header[1].value, header[2])}"
            )
        person = _respondent_from_demo(demo, line)
        if person is None:
            if rid in respondents:
                raise SchemaError(f"line {line}: respondent {rid!r} demographics conflict")
            incomplete.add(rid)
        else:
            if rid in incomplete:
                raise SchemaError(f"line {line}: respondent {rid!r} demographics conflict")
            known = respondents.get(rid)
            if known is not None and known != person:
                raise SchemaError(f"line {line}: respondent {rid!r} demographics conflict")
            respondents[rid] = person
        question_ids.add(qid)
        raw_responses.append(Response(respondent_id=rid, question_id=qid, answer=answer))

    if header is None:
        raise ParseError("survey file contains no records")

    responses = [r for r in raw_responses if r.respondent_id not in incomplete]
    return SurveyWave(
        wave_id=header[0],
        country=header[1],
        year=header[2],
        responses=responses,
        respondents=respondents,
        question_ids=frozenset(question_ids),
        dropped_respondents=len(incomplete),
    )


def serialize_survey_file(wave: SurveyWave, fmt: str = "jsonl") -> str:
    """Serialize a wave back to JSONL or CSV; parse() of the result round-trips."""
    rows = []
    for r in wave.responses:
        person = wave.respondents[r.respondent_id]
        rows.append(
            {
                "wave": wave.wave_id,
                "country": wave.country.value,
                "year": wave.year,
                "respondent": {
                    "id": person.id,
                    "sex": person.sex.value,
                    "age": person.age_years,
                    "education": person.education.value,
                    "income": person.income.value,
                },
                "question_id": r.question_id,
                "answer": r.answer,
            }
        )
    if fmt == "jsonl":
        return "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in rows)
    if fmt == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(
            ["wave", "country", "year", "respondent_id", "sex", "age",
             "education", "income", "question_id", "answer"]
        )
        for row in rows:
            p = row["respondent"]
            writer.writerow(
                [row["wave"], row["country"], row["year"], p["id"], p["sex"],
                 p["age"], p["education"], p["income"], row["question_id"], row["answer"]]
            )
        return out.getvalue()
    raise ConfigError(f"unknown survey format {fmt!r} (expected jsonl or csv)")


def attach_questions(wave: SurveyWave, catalog: dict[str, Question]) -> SurveyWave:
    """Return a copy of the wave with catalog metadata for every question seen."""
    missing = sorted(wave.question_ids - catalog.keys())
    if missing:
        raise SchemaError(f"catalog has no entry for question(s): {', '.join(missing)}")
    picked = {}
    for qid in wave.question_ids:
        q = catalog[qid]
        if q.country != wave.country:
            raise SchemaError(
                f"question {qid!r} belongs to {q.country.value}, wave is {wave.country.value}"
            )
        picked[qid] = q
    return replace(wave, questions=picked)


def filter_responses(
    wave: SurveyWave, non_substantive: frozenset[str] = DEFAULT_NON_SUBSTANTIVE
) -> SurveyWave:
    """Drop responses whose trimmed answer is empty or a non-substantive label.

    Idempotent; respondents and question metadata are untouched.
    """
    kept = [
        r for r in wave.responses
        if r.answer.strip() and r.answer.strip() not in non_substantive
    ]
    return replace(wave, responses=kept)


def classify_questions(waves: Iterable[SurveyWave]) -> QuestionSplit:
    """Split question ids into seen (all three waves) and unseen (later two only)."""
    by_wave = {w.wave_id: w for w in waves}
    if set(by_wave) != {5, 6, 7}:
        raise PreconditionError(
            f"classification needs exactly waves 5, 6 and 7; got {sorted(by_wave)}"
        )
    countries = {w.country for w in by_wave.values()}
    if len(countries) != 1:
        raise PreconditionError("classification needs waves from a single country")
    q5, q6, q7 = (by_wave[w].question_ids for w in (5, 6, 7))
    seen = tuple(sorted(q5 & q6 & q7))
    unseen = tuple(sorted((q6 & q7) - q5))
    return QuestionSplit(country=countries.pop(), seen=seen, unseen=unseen)
