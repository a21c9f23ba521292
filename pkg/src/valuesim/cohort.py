"""Cohort stratification, majority answers, and wave-pair dataset assembly."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import ContractError, EmptyCellError, PreconditionError, SchemaError
from .survey import Question, QuestionSplit, QuestionType, Respondent, SurveyWave
from .taxonomy import (
    WAVE_YEARS,
    AgeBucket,
    Country,
    Education,
    Income,
    Sex,
    bucket_for_age,
    parse_enum,
)

DEFAULT_MIN_COHORT_N = 5


@dataclass(frozen=True, order=False)
class DemographicKey:
    sex: Sex
    age_bucket: AgeBucket
    education: Education
    income: Income

    def sort_key(self) -> tuple[int, int, int, int]:
        return (
            list(Sex).index(self.sex),
            list(AgeBucket).index(self.age_bucket),
            list(Education).index(self.education),
            list(Income).index(self.income),
        )

    def slug(self) -> str:
        return "/".join(
            (self.sex.value, self.age_bucket.value, self.education.value, self.income.value)
        )

    @classmethod
    def from_slug(cls, slug: str) -> "DemographicKey":
        parts = slug.split("/")
        if len(parts) != 4:
            raise SchemaError(f"malformed cohort key {slug!r}")
        return cls(
            sex=parse_enum(Sex, parts[0], "sex"),
            age_bucket=parse_enum(AgeBucket, parts[1], "age bucket"),
            education=parse_enum(Education, parts[2], "education"),
            income=parse_enum(Income, parts[3], "income"),
        )


def assign_group(person: Respondent) -> DemographicKey | None:
    """Assign a respondent to a demographic cell, or None when out of age range."""
    bucket = bucket_for_age(person.age_years)
    if bucket is None:
        return None
    return DemographicKey(
        sex=person.sex, age_bucket=bucket, education=person.education, income=person.income
    )


@dataclass(frozen=True)
class GroupAnswer:
    question_id: str
    answer: str
    distribution: Mapping[str, int]


@dataclass
class Cohort:
    key: DemographicKey
    country: Country
    per_wave_n: dict[int, int] = field(default_factory=dict)
    answers: dict[tuple[int, str], GroupAnswer] = field(default_factory=dict)


def majority_answer(
    labels: Sequence[str], option_order: Sequence[str], question_id: str = ""
) -> GroupAnswer:
    """Most frequent label; ties go to the option listed earliest.

    Raises EmptyCellError for no labels, ContractError for a label outside
    the option order.
    """
    if not labels:
        raise EmptyCellError(f"no substantive answers for question {question_id!r}")
    index = {label: i for i, label in enumerate(option_order)}
    counts = Counter(labels)
    for label in counts:
        if label not in index:
            raise ContractError(
                f"answer {label!r} is not an option of question {question_id!r}"
            )
    winner = min(counts, key=lambda lbl: (-counts[lbl], index[lbl]))
    distribution = {
        label: counts[label] for label in option_order if counts.get(label, 0) > 0
    }
    return GroupAnswer(question_id=question_id, answer=winner, distribution=distribution)


def build_cohorts(waves: Iterable[SurveyWave]) -> list[Cohort]:
    """Stratify filtered waves into demographic cohorts with majority answers.

    Expects non-substantive responses to have been filtered and question
    metadata attached.  Cells with no substantive answers are simply absent
    from the result (a question may not exist in an early wave).
    """
    wave_list = list(waves)
    if not wave_list:
        raise PreconditionError("at least one wave is required")
    countries = {w.country for w in wave_list}
    if len(countries) != 1:
        raise PreconditionError("all waves must come from a single country")
    country = countries.pop()

    cohorts: dict[DemographicKey, Cohort] = {}
    for wave in wave_list:
        member_key: dict[str, DemographicKey] = {}
        for rid, person in wave.respondents.items():
            key = assign_group(person)
            if key is None:
                continue
            member_key[rid] = key
            cohort = cohorts.setdefault(key, Cohort(key=key, country=country))
            cohort.per_wave_n[wave.wave_id] = cohort.per_wave_n.get(wave.wave_id, 0) + 1

        cells: dict[tuple[DemographicKey, str], list[str]] = {}
        for resp in wave.responses:
            key = member_key.get(resp.respondent_id)
            if key is None:
                continue
            cells.setdefault((key, resp.question_id), []).append(resp.answer)

        for (key, qid), labels in cells.items():
            question = wave.questions.get(qid)
            if question is None:
                raise ContractError(f"wave {wave.wave_id} has no metadata for question {qid!r}")
            cohorts[key].answers[(wave.wave_id, qid)] = majority_answer(
                labels, question.labels(), qid
            )

    return sorted(cohorts.values(), key=lambda c: c.key.sort_key())


def prune_groups(
    cohorts: Iterable[Cohort],
    min_n: int = DEFAULT_MIN_COHORT_N,
    required_waves: Sequence[int] = (5, 6, 7),
) -> list[Cohort]:
    """Keep cohorts with at least min_n respondents in every required wave."""
    if min_n < 1:
        raise PreconditionError(f"min_n must be >= 1, got {min_n}")
    kept = [
        c for c in cohorts
        if all(c.per_wave_n.get(w, 0) >= min_n for w in required_waves)
    ]
    return sorted(kept, key=lambda c: c.key.sort_key())


@dataclass(frozen=True)
class Entry:
    """One prediction task: a cohort's answer trajectory on one question."""

    country: Country
    cohort_key: DemographicKey
    question_id: str
    qtype: QuestionType
    prev_wave: int
    prev_year: int
    prev_label: str
    target_wave: int
    target_year: int
    gold_label: str

    def key(self) -> tuple:
        return (*self.cohort_key.sort_key(), self.question_id, self.target_wave)

    def key_str(self) -> str:
        return f"{self.cohort_key.slug()}|{self.question_id}|w{self.target_wave}"


@dataclass(frozen=True)
class Dataset:
    country: Country
    prev_wave: int
    target_wave: int
    entries: tuple[Entry, ...]
    skipped_missing_prev: int
    skipped_missing_gold: int


def build_dataset(
    cohorts: Sequence[Cohort],
    question_ids: Iterable[str],
    catalog: Mapping[str, Question],
    prev_wave: int,
    target_wave: int,
) -> Dataset:
    """Pair each cohort's answers across two waves into prediction entries.

    Entries are ordered by (cohort key, question id).  Cells lacking the
    earlier or the later majority answer are skipped and counted.
    """
    if prev_wave >= target_wave:
        raise PreconditionError(
            f"prev wave must precede target wave, got {prev_wave} -> {target_wave}"
        )
    if not cohorts:
        raise PreconditionError("no cohorts to build a dataset from")
    countries = {c.country for c in cohorts}
    if len(countries) != 1:
        raise PreconditionError("cohorts must come from a single country")
    country = countries.pop()
    years = WAVE_YEARS[country]
    if prev_wave not in years or target_wave not in years:
        raise PreconditionError(f"waves must be among {sorted(years)}")

    qids = sorted(set(question_ids))
    missing_meta = [q for q in qids if q not in catalog]
    if missing_meta:
        raise PreconditionError(f"catalog has no entry for: {', '.join(missing_meta)}")

    entries: list[Entry] = []
    skipped_prev = skipped_gold = 0
    for cohort in sorted(cohorts, key=lambda c: c.key.sort_key()):
        for qid in qids:
            prev = cohort.answers.get((prev_wave, qid))
            gold = cohort.answers.get((target_wave, qid))
            if prev is None:
                skipped_prev += 1
                continue
            if gold is None:
                skipped_gold += 1
                continue
            entries.append(
                Entry(
                    country=country,
                    cohort_key=cohort.key,
                    question_id=qid,
                    qtype=catalog[qid].qtype,
                    prev_wave=prev_wave,
                    prev_year=years[prev_wave],
                    prev_label=prev.answer,
                    target_wave=target_wave,
                    target_year=years[target_wave],
                    gold_label=gold.answer,
                )
            )
    return Dataset(
        country=country,
        prev_wave=prev_wave,
        target_wave=target_wave,
        entries=tuple(entries),
        skipped_missing_prev=skipped_prev,
        skipped_missing_gold=skipped_gold,
    )


def stage_datasets(
    cohorts: Sequence[Cohort], split: QuestionSplit, catalog: Mapping[str, Question]
) -> dict[str, Dataset]:
    """The three standard stages: train (seen, 5->6) and the two test stages.

    test1 replays seen questions across the later wave pair (6->7); test2
    does the same for unseen questions.
    """
    return {
        "train": build_dataset(cohorts, split.seen, catalog, 5, 6),
        "test1": build_dataset(cohorts, split.seen, catalog, 6, 7),
        "test2": build_dataset(cohorts, split.unseen, catalog, 6, 7),
    }


# --- serialization -----------------------------------------------------------

def cohort_to_dict(cohort: Cohort) -> dict:
    return {
        "key": {
            "sex": cohort.key.sex.value,
            "age_bucket": cohort.key.age_bucket.value,
            "education": cohort.key.education.value,
            "income": cohort.key.income.value,
        },
        "country": cohort.country.value,
        "per_wave_n": {str(w): n for w, n in sorted(cohort.per_wave_n.items())},
        "answers": [
            {
                "wave": wave,
                "question_id": qid,
                "answer": ga.answer,
                "distribution": dict(ga.distribution),
            }
            for (wave, qid), ga in sorted(cohort.answers.items())
        ],
    }


def cohort_from_dict(rec: dict) -> Cohort:
    try:
        key = DemographicKey(
            sex=parse_enum(Sex, rec["key"]["sex"], "sex"),
            age_bucket=parse_enum(AgeBucket, rec["key"]["age_bucket"], "age bucket"),
            education=parse_enum(Education, rec["key"]["education"], "education"),
            income=parse_enum(Income, rec["key"]["income"], "income"),
        )
        cohort = Cohort(
            key=key,
            country=parse_enum(Country, rec["country"], "country"),
            per_wave_n={int(w): int(n) for w, n in rec["per_wave_n"].items()},
        )
        for a in rec["answers"]:
            ga = GroupAnswer(
                question_id=a["question_id"],
                answer=a["answer"],
                distribution=dict(a["distribution"]),
            )
            cohort.answers[(int(a["wave"]), a["question_id"])] = ga
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"malformed cohort record: {e}") from None
    return cohort


def entry_to_dict(entry: Entry) -> dict:
    return {
        "country": entry.country.value,
        "cohort": entry.cohort_key.slug(),
        "question_id": entry.question_id,
        "qtype": entry.qtype.value,
        "prev_wave": entry.prev_wave,
        "prev_year": entry.prev_year,
        "prev_label": entry.prev_label,
        "target_wave": entry.target_wave,
        "target_year": entry.target_year,
        "gold_label": entry.gold_label,
    }


def entry_from_dict(rec: dict) -> Entry:
    try:
        return Entry(
            country=parse_enum(Country, rec["country"], "country"),
            cohort_key=DemographicKey.from_slug(rec["cohort"]),
            question_id=rec["question_id"],
            qtype=QuestionType(rec["qtype"]),
            prev_wave=int(rec["prev_wave"]),
            prev_year=int(rec["prev_year"]),
            prev_label=rec["prev_label"],
            target_wave=int(rec["target_wave"]),
            target_year=int(rec["target_year"]),
            gold_label=rec["gold_label"],
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"malformed entry record: {e}") from None


def dataset_to_dict(ds: Dataset) -> dict:
    return {
        "country": ds.country.value,
        "prev_wave": ds.prev_wave,
        "target_wave": ds.target_wave,
        "skipped_missing_prev": ds.skipped_missing_prev,
        "skipped_missing_gold": ds.skipped_missing_gold,
        "entries": [entry_to_dict(e) for e in ds.entries],
    }


def dataset_from_dict(rec: dict) -> Dataset:
    try:
        return Dataset(
            country=parse_enum(Country, rec["country"], "country"),
            prev_wave=int(rec["prev_wave"]),
            target_wave=int(rec["target_wave"]),
            entries=tuple(entry_from_dict(e) for e in rec["entries"]),
            skipped_missing_prev=int(rec["skipped_missing_prev"]),
            skipped_missing_gold=int(rec["skipped_missing_gold"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"malformed dataset record: {e}") from None
