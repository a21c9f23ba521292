"""Fixed vocabularies: countries, survey waves, demographics, value themes."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError


class Country(str, Enum):
    CN = "CN"
    US = "US"

    @property
    def language(self) -> str:
        return "zh" if self is Country.CN else "en"

    @property
    def display_en(self) -> str:
        return "China" if self is Country.CN else "United States"


# Field years for each survey wave, per country.
WAVE_YEARS: dict[Country, dict[int, int]] = {
    Country.CN: {5: 2007, 6: 2012, 7: 2018},
    Country.US: {5: 2006, 6: 2011, 7: 2017},
}

WAVES = (5, 6, 7)


class Sex(str, Enum):
    MALE = "Male"
    FEMALE = "Female"


class AgeBucket(str, Enum):
    YOUNG = "Young"
    MIDDLE_AGE = "Middle Age"
    YOUNG_OLD = "Young-Old"


# Inclusive year-of-age ranges; anything outside the union is excluded
# from stratification.
AGE_RANGES: dict[AgeBucket, tuple[int, int]] = {
    AgeBucket.YOUNG: (18, 44),
    AgeBucket.MIDDLE_AGE: (45, 59),
    AgeBucket.YOUNG_OLD: (60, 74),
}


class Education(str, Enum):
    HIGHER = "Higher"
    MIDDLE = "Middle"
    LOWER = "Lower"


class Income(str, Enum):
    HIGH = "High"
    MEDIUM = "Medium"
    LOW = "Low"


def bucket_for_age(age_years: int) -> AgeBucket | None:
    """Map an age in whole years to its bucket, or None when out of range."""
    for bucket, (lo, hi) in AGE_RANGES.items():
        if lo <= age_years <= hi:
            return bucket
    return None


@dataclass(frozen=True)
class ValueDimension:
    """One of the ten thematic categories questions are grouped under."""

    id: int
    name: str


VALUE_DIMENSIONS: tuple[ValueDimension, ...] = (
    ValueDimension(1, "Social Values, Attitudes and Stereotypes"),
    ValueDimension(2, "Happiness and Well-being"),
    ValueDimension(3, "Social Capital, Trust and Organizational Membership"),
    ValueDimension(4, "Economic Values"),
    ValueDimension(5, "Security"),
    ValueDimension(6, "Science and Technology"),
    ValueDimension(7, "Religious Values"),
    ValueDimension(8, "Ethical Values and Norms"),
    ValueDimension(9, "Political Interest and Political Participation"),
    ValueDimension(10, "Political Culture and Political Regimes"),
)

_BY_NAME = {d.name: d for d in VALUE_DIMENSIONS}
_BY_ID = {d.id: d for d in VALUE_DIMENSIONS}


def dimension_by_name(name: str) -> ValueDimension:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ConfigError(f"unknown value theme: {name!r}") from None


def dimension_by_id(dim_id: int) -> ValueDimension:
    try:
        return _BY_ID[dim_id]
    except KeyError:
        raise ConfigError(f"unknown value theme id: {dim_id}") from None


def parse_enum(cls, token: str, field: str):
    """Parse a canonical string token into the given enum, or raise."""
    try:
        return cls(token)
    except ValueError:
        valid = ", ".join(m.value for m in cls)
        raise ConfigError(f"invalid {field} {token!r} (expected one of: {valid})") from None
