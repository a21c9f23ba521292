"""Synthetic fixture generation mirroring the real corpus shapes.

Produces deterministic survey waves, question catalogs and event pools whose
cohort structure and question counts match the reference study layout, so
pipeline behaviour (entry counts, pruning, retrieval) can be checked without
the original data.
"""

from __future__ import annotations

import datetime as dt
import itertools
import math
import random
from pathlib import Path

from .cohort import DemographicKey
from .errors import PreconditionError
from .events import Event, EventPool
from .survey import (
    DEFAULT_NON_SUBSTANTIVE,
    Option,
    Question,
    Respondent,
    Response,
    SurveyWave,
    _classify_options,
    serialize_question_catalog,
)
from .taxonomy import (
    AGE_RANGES,
    WAVE_YEARS,
    AgeBucket,
    Country,
    Education,
    Income,
    Sex,
    dimension_by_id,
)

# Reference cohort sizes per wave (W7, W6, W5), one row per retained cohort.
_CN_ROWS = [
    ("Female", "Middle Age", "Lower", "Low", 173, 56, 88),
    ("Female", "Middle Age", "Lower", "Medium", 194, 68, 82),
    ("Female", "Middle Age", "Middle", "Low", 32, 45, 29),
    ("Female", "Middle Age", "Middle", "Medium", 57, 88, 38),
    ("Female", "Young-Old", "Lower", "Low", 130, 62, 53),
    ("Female", "Young-Old", "Lower", "Medium", 133, 80, 50),
    ("Female", "Young-Old", "Middle", "Medium", 26, 26, 14),
    ("Female", "Young", "Higher", "Low", 50, 35, 6),
    ("Female", "Young", "Higher", "Medium", 228, 113, 40),
    ("Female", "Young", "Lower", "Low", 132, 33, 107),
    ("Female", "Young", "Lower", "Medium", 172, 40, 96),
    ("Female", "Young", "Middle", "Low", 51, 102, 71),
    ("Female", "Young", "Middle", "Medium", 158, 217, 128),
    ("Male", "Middle Age", "Lower", "Low", 122, 41, 73),
    ("Male", "Middle Age", "Lower", "Medium", 135, 59, 61),
    ("Male", "Middle Age", "Middle", "Low", 47, 63, 47),
    ("Male", "Middle Age", "Middle", "Medium", 59, 82, 68),
    ("Male", "Young-Old", "Higher", "Medium", 13, 9, 6),
    ("Male", "Young-Old", "Lower", "Low", 98, 43, 53),
    ("Male", "Young-Old", "Lower", "Medium", 107, 65, 24),
    ("Male", "Young-Old", "Middle", "Low", 22, 20, 17),
    ("Male", "Young-Old", "Middle", "Medium", 32, 47, 23),
    ("Male", "Young", "Higher", "Low", 55, 16, 7),
    ("Male", "Young", "Higher", "Medium", 176, 106, 37),
    ("Male", "Young", "Lower", "Low", 96, 37, 61),
    ("Male", "Young", "Lower", "Medium", 103, 28, 33),
    ("Male", "Young", "Middle", "Low", 48, 101, 66),
    ("Male", "Young", "Middle", "Medium", 129, 217, 140),
]

_US_ROWS = [
    ("Female", "Middle Age", "Higher", "Medium", 68, 159, 13),
    ("Female", "Middle Age", "Middle", "Low", 52, 43, 26),
    ("Female", "Middle Age", "Middle", "Medium", 90, 83, 105),
    ("Female", "Young-Old", "Higher", "Medium", 24, 95, 7),
    ("Female", "Young-Old", "Middle", "Low", 29, 35, 23),
    ("Female", "Young-Old", "Middle", "Medium", 71, 91, 69),
    ("Female", "Young", "Higher", "Medium", 304, 219, 20),
    ("Female", "Young", "Middle", "High", 18, 7, 11),
    ("Female", "Young", "Middle", "Low", 101, 45, 53),
    ("Female", "Young", "Middle", "Medium", 250, 84, 168),
    ("Male", "Middle Age", "Higher", "High", 29, 23, 7),
    ("Male", "Middle Age", "Higher", "Medium", 149, 132, 18),
    ("Male", "Middle Age", "Middle", "High", 9, 8, 9),
    ("Male", "Middle Age", "Middle", "Low", 39, 44, 28),
    ("Male", "Middle Age", "Middle", "Medium", 111, 81, 110),
    ("Male", "Young-Old", "Higher", "Medium", 132, 116, 7),
    ("Male", "Young-Old", "Middle", "Low", 29, 23, 17),
    ("Male", "Young-Old", "Middle", "Medium", 82, 59, 64),
    ("Male", "Young", "Higher", "High", 45, 28, 7),
    ("Male", "Young", "Higher", "Medium", 286, 182, 17),
    ("Male", "Young", "Middle", "High", 14, 18, 11),
    ("Male", "Young", "Middle", "Low", 65, 49, 49),
    ("Male", "Young", "Middle", "Medium", 159, 104, 159),
]

# Question-count shape per country: (seen single, seen scale, unseen single,
# unseen scale).
QUESTION_SHAPE = {
    Country.CN: (68, 30, 23, 8),
    Country.US: (80, 31, 34, 8),
}

# Default event pool sizes and the calendar years events may fall in.
EVENT_SHAPE = {
    Country.CN: (1107, tuple(range(2008, 2012)) + tuple(range(2013, 2018))),
    Country.US: (595, tuple(range(2007, 2011)) + tuple(range(2012, 2017))),
}


def reference_cohort_spec(country: Country) -> list[tuple[DemographicKey, dict[int, int]]]:
    """The retained cohorts with their real per-wave sample sizes."""
    rows = _CN_ROWS if country is Country.CN else _US_ROWS
    spec = []
    for sex, age, edu, inc, w7, w6, w5 in rows:
        key = DemographicKey(
            sex=Sex(sex), age_bucket=AgeBucket(age), education=Education(edu), income=Income(inc)
        )
        spec.append((key, {5: w5, 6: w6, 7: w7}))
    return spec


def small_cohort_spec(
    country: Country, n: int = 7
) -> list[tuple[DemographicKey, dict[int, int]]]:
    """Same cohort keys as the reference layout but tiny uniform cells."""
    return [(key, {5: n, 6: n, 7: n}) for key, _ in reference_cohort_spec(country)]


def below_threshold_keys(country: Country, count: int) -> list[DemographicKey]:
    """Demographic cells absent from the reference layout, for pruning tests."""
    present = {key for key, _ in reference_cohort_spec(country)}
    extras = []
    for sex, age, edu, inc in itertools.product(Sex, AgeBucket, Education, Income):
        key = DemographicKey(sex=sex, age_bucket=age, education=edu, income=inc)
        if key not in present:
            extras.append(key)
        if len(extras) == count:
            return extras
    raise PreconditionError(f"only {len(extras)} spare demographic cells exist")


_EN_TOPICS = (
    "family life", "political participation", "trust in neighbours", "job security",
    "scientific progress", "religious practice", "environmental protection",
    "national institutions", "personal happiness", "economic competition",
)
_EN_OPTION_SETS = (
    ("Very important", "Rather important", "Not very important", "Not at all important"),
    ("Strongly agree", "Agree", "Disagree", "Strongly disagree"),
    ("Very interested", "Somewhat interested", "Not very interested", "Not at all interested"),
)
_ZH_TOPICS = (
    "家庭生活", "政治参与", "邻里信任", "工作保障", "科学进步",
    "宗教活动", "环境保护", "国家机构", "个人幸福", "经济竞争",
)
_ZH_OPTION_SETS = (
    ("非常重要", "比较重要", "不太重要", "完全不重要"),
    ("非常同意", "同意", "不同意", "非常不同意"),
    ("非常感兴趣", "比较感兴趣", "不太感兴趣", "完全不感兴趣"),
)


def _make_question(country: Country, qid: str, index: int, scale: bool) -> Question:
    theme = dimension_by_id(index % 10 + 1)
    if scale:
        if country is Country.CN:
            topic = _ZH_TOPICS[index % len(_ZH_TOPICS)]
            text = f"请用1到10分评价{topic}对您的重要程度？1分表示完全不重要，10分表示非常重要。"
        else:
            topic = _EN_TOPICS[index % len(_EN_TOPICS)]
            text = (
                f"On a scale from 1 to 10, how important is {topic} to you? "
                "1 means not at all important and 10 means very important."
            )
        options = tuple(Option(label=str(i), text=str(i)) for i in range(1, 11))
    else:
        if country is Country.CN:
            topic = _ZH_TOPICS[index % len(_ZH_TOPICS)]
            texts = _ZH_OPTION_SETS[index % len(_ZH_OPTION_SETS)]
            text = f"您如何看待{topic}？请从下列选项中选择一项。"
        else:
            topic = _EN_TOPICS[index % len(_EN_TOPICS)]
            texts = _EN_OPTION_SETS[index % len(_EN_OPTION_SETS)]
            text = f"How would you rate {topic}? Please select one option from the following."
        options = tuple(
            Option(label=chr(ord("A") + i), text=t) for i, t in enumerate(texts)
        )
    return Question(
        id=qid,
        country=country,
        text=text,
        options=options,
        theme=theme,
        qtype=_classify_options(tuple(o.text for o in options)),
    )


def make_catalog(
    country: Country, shape: tuple[int, int, int, int] | None = None
) -> tuple[dict[str, Question], list[str], list[str]]:
    """Build (catalog, seen ids, unseen ids) with the given question counts.

    Shape is (seen single-choice, seen scale, unseen single-choice, unseen
    scale); the default mirrors the reference corpus for the country.
    """
    n_ss, n_sc, n_us, n_uc = shape if shape is not None else QUESTION_SHAPE[country]
    catalog: dict[str, Question] = {}
    seen, unseen = [], []
    idx = 0
    for i in range(n_ss + n_sc):
        qid = f"Q{i + 1:03d}"
        catalog[qid] = _make_question(country, qid, idx, scale=i >= n_ss)
        seen.append(qid)
        idx += 1
    for i in range(n_us + n_uc):
        qid = f"U{i + 1:03d}"
        catalog[qid] = _make_question(country, qid, idx, scale=i >= n_us)
        unseen.append(qid)
        idx += 1
    return catalog, seen, unseen


def _age_for(key: DemographicKey, j: int) -> int:
    lo, hi = AGE_RANGES[key.age_bucket]
    return lo + j % (hi - lo + 1)


def make_survey_waves(
    country: Country,
    catalog: dict[str, Question],
    seen_ids: list[str],
    unseen_ids: list[str],
    cohort_spec: list[tuple[DemographicKey, dict[int, int]]] | None = None,
    seed: int = 0,
    change_rate: float = 0.3,
    nonsubstantive_rate: float = 0.05,
    extra_small_cells: int = 0,
    extra_out_of_range: int = 0,
) -> dict[int, SurveyWave]:
    """Three synthetic waves with a controlled majority answer per cell.

    Every (cohort, question, wave) cell where the question exists gets a
    strict majority, so dataset entry counts equal cohorts x questions.
    ``change_rate`` is the per-wave-transition chance a cell's majority
    moves to a different option.  Optional extras: demographic cells below
    any sane pruning threshold, and out-of-age-range respondents, both of
    which must disappear downstream.
    """
    if cohort_spec is None:
        cohort_spec = small_cohort_spec(country)
    spec = list(cohort_spec)
    for key in below_threshold_keys(country, extra_small_cells):
        spec.append((key, {5: 2, 6: 2, 7: 2}))

    waves: dict[int, SurveyWave] = {}
    nonsub_cycle = sorted(DEFAULT_NON_SUBSTANTIVE)
    for wave_id, year in WAVE_YEARS[country].items():
        qids = list(seen_ids) if wave_id == 5 else list(seen_ids) + list(unseen_ids)
        respondents: dict[str, Respondent] = {}
        responses: list[Response] = []
        for gi, (key, sizes) in enumerate(spec):
            n = sizes[wave_id]
            member_ids = []
            for j in range(n):
                rid = f"{country.value}-w{wave_id}-g{gi:02d}-{j:03d}"
                respondents[rid] = Respondent(
                    id=rid,
                    sex=key.sex,
                    age_years=_age_for(key, j),
                    education=key.education,
                    income=key.income,
                )
                member_ids.append(rid)
            for qid in qids:
                question = catalog[qid]
                n_opts = len(question.options)
                cell_rng = random.Random(f"{seed}|{country.value}|{key.slug()}|{qid}")
                pref = cell_rng.randrange(n_opts)
                for _ in range(5, wave_id):  # advance the majority through waves
                    if cell_rng.random() < change_rate:
                        pref = (pref + 1 + cell_rng.randrange(n_opts - 1)) % n_opts
                k_major = max(1, math.ceil(0.7 * n))
                noise_rng = random.Random(f"{seed}|noise|{wave_id}|{key.slug()}|{qid}")
                for j, rid in enumerate(member_ids):
                    if j < k_major:
                        label = question.options[pref].label
                    elif noise_rng.random() < nonsubstantive_rate:
                        label = nonsub_cycle[j % len(nonsub_cycle)]
                    else:
                        label = question.options[(pref + 1 + (j - k_major) % (n_opts - 1)) % n_opts].label
                    responses.append(Response(respondent_id=rid, question_id=qid, answer=label))
        for j in range(extra_out_of_range):
            rid = f"{country.value}-w{wave_id}-oor-{j:03d}"
            respondents[rid] = Respondent(
                id=rid,
                sex=Sex.MALE if j % 2 else Sex.FEMALE,
                age_years=80 if j % 2 else 15,
                education=Education.MIDDLE,
                income=Income.MEDIUM,
            )
            responses.append(
                Response(respondent_id=rid, question_id=qids[0],
                         answer=catalog[qids[0]].options[0].label)
            )
        waves[wave_id] = SurveyWave(
            wave_id=wave_id,
            country=country,
            year=year,
            responses=responses,
            respondents=respondents,
            questions={qid: catalog[qid] for qid in qids},
            question_ids=frozenset(qids),
        )
    return waves


_EVENT_SUBJECTS = (
    "parliament", "central bank", "labour union", "tech industry", "health agency",
    "border authority", "energy sector", "school board", "supreme court", "city council",
)
_EVENT_ACTIONS = (
    "passes sweeping reform", "faces nationwide protests", "announces record investment",
    "suffers major scandal", "launches relief program", "tightens regulations",
    "reports historic growth", "negotiates landmark treaty", "survives confidence vote",
    "unveils modernization plan",
)


def make_events(
    country: Country, n: int | None = None, seed: int = 0
) -> EventPool:
    """A deterministic event pool; defaults match the reference pool sizes."""
    size, years = EVENT_SHAPE[country]
    if n is not None:
        size = n
    rng = random.Random(f"{seed}|events|{country.value}")
    events = []
    for i in range(size):
        year = years[i % len(years)]
        date = dt.date(year, rng.randrange(1, 13), rng.randrange(1, 29))
        subject = _EVENT_SUBJECTS[rng.randrange(len(_EVENT_SUBJECTS))]
        action = _EVENT_ACTIONS[rng.randrange(len(_EVENT_ACTIONS))]
        title = f"{subject.title()} {action}"
        description = (
            f"In {year}, the {subject} {action.lower()} with wide coverage in {country.value} "
            f"media (synthetic item {i:04d})."
        )
        events.append(
            Event(
                id=f"{country.value}-evt-{i:04d}",
                country=country,
                date=date,
                title=title,
                description=description,
                source="synthetic",
            )
        )
    return EventPool(
        country=country, events=tuple(sorted(events, key=lambda e: (e.date, e.id)))
    )


def write_fixture_tree(
    out_dir: str | Path,
    country: Country,
    seed: int = 0,
    shape: tuple[int, int, int, int] | None = None,
    cohort_spec: list[tuple[DemographicKey, dict[int, int]]] | None = None,
    n_events: int | None = None,
) -> dict[str, Path]:
    """Write a full synthetic input tree; returns the paths keyed by role."""
    from .survey import serialize_survey_file  # local import avoids cycle noise

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    catalog, seen, unseen = make_catalog(country, shape)
    waves = make_survey_waves(country, catalog, seen, unseen, cohort_spec, seed=seed)
    paths: dict[str, Path] = {}
    for wave_id, wave in sorted(waves.items()):
        p = out / f"wave{wave_id}.jsonl"
        p.write_text(serialize_survey_file(wave), encoding="utf-8")
        paths[f"wave{wave_id}"] = p
    paths["catalog"] = out / "catalog.json"
    paths["catalog"].write_text(serialize_question_catalog(catalog), encoding="utf-8")
    pool = make_events(country, n=n_events, seed=seed)
    paths["events"] = out / "events.jsonl"
    from .events import serialize_events

    paths["events"].write_text(serialize_events(pool), encoding="utf-8")
    return paths
