"""Societal event pools: loading, deduplication, and survey-year exclusion."""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, replace
from typing import Iterable

from .errors import ConfigError, ParseError, SchemaError
from .taxonomy import WAVE_YEARS, Country, parse_enum

# Years removed from each pool by default: the country's own survey field
# years, so retrieved context never leaks the measurement moments themselves.
DEFAULT_EXCLUDED_YEARS: dict[Country, frozenset[int]] = {
    country: frozenset(years.values()) for country, years in WAVE_YEARS.items()
}


@dataclass(frozen=True)
class Event:
    id: str
    country: Country
    date: dt.date
    title: str
    description: str
    source: str = ""


@dataclass(frozen=True)
class EventPool:
    country: Country
    events: tuple[Event, ...]
    excluded_years: frozenset[int] = frozenset()


def _event_from_record(rec: dict, line: int) -> Event:
    for key in ("id", "country", "date", "title", "description"):
        if key not in rec:
            raise ParseError(f"event record missing field {key!r}", line)
    if not isinstance(rec["id"], str) or not rec["id"]:
        raise ParseError("event id must be a non-empty string", line)
    try:
        country = parse_enum(Country, rec["country"], "country")
    except ConfigError as e:
        raise ParseError(str(e), line) from None
    try:
        date = dt.date.fromisoformat(rec["date"])
    except (TypeError, ValueError):
        raise ParseError(f"event date must be ISO YYYY-MM-DD, got {rec['date']!r}", line) from None
    title, desc = rec["title"], rec["description"]
    if not isinstance(title, str) or not title.strip():
        raise ParseError("event title must be a non-empty string", line)
    if not isinstance(desc, str):
        raise ParseError("event description must be a string", line)
    return Event(
        id=rec["id"],
        country=country,
        date=date,
        title=title,
        description=desc,
        source=rec.get("source", "") or "",
    )


def load_events(raw: str | bytes) -> EventPool:
    """Load a JSONL event pool; exact duplicates collapse, id conflicts fail.

    Events come out sorted by (date, id) so every downstream scan is
    order-stable.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    by_id: dict[str, Event] = {}
    countries: set[Country] = set()
    for i, ln in enumerate(raw.splitlines(), start=1):
        if not ln.strip():
            continue
        try:
            rec = json.loads(ln)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", i) from None
        if not isinstance(rec, dict):
            raise ParseError("event record must be a JSON object", i)
        event = _event_from_record(rec, i)
        known = by_id.get(event.id)
        if known is not None and known != event:
            raise SchemaError(f"line {i}: event id {event.id!r} repeated with different content")
        by_id[event.id] = event
        countries.add(event.country)
    if not by_id:
        raise ParseError("event file contains no records")
    if len(countries) != 1:
        raise SchemaError(f"event pool mixes countries: {sorted(c.value for c in countries)}")
    events = tuple(sorted(by_id.values(), key=lambda e: (e.date, e.id)))
    return EventPool(country=countries.pop(), events=events)


def filter_event_years(
    pool: EventPool, excluded_years: Iterable[int] | None = None
) -> tuple[EventPool, int]:
    """Remove events dated in excluded years; returns (new pool, removed count).

    With no explicit years, the country's survey field years are removed.
    Exclusions accumulate across calls, so filtering is idempotent and two
    filters in either order land on the same pool.
    """
    if excluded_years is None:
        years = DEFAULT_EXCLUDED_YEARS[pool.country]
    else:
        years = frozenset(int(y) for y in excluded_years)
    combined = pool.excluded_years | years
    kept = tuple(e for e in pool.events if e.date.year not in combined)
    removed = len(pool.events) - len(kept)
    return replace(pool, events=kept, excluded_years=combined), removed


def event_to_dict(event: Event) -> dict:
    return {
        "id": event.id,
        "country": event.country.value,
        "date": event.date.isoformat(),
        "title": event.title,
        "description": event.description,
        "source": event.source,
    }


def serialize_events(pool: EventPool) -> str:
    return "".join(json.dumps(event_to_dict(e), ensure_ascii=False) + "\n" for e in pool.events)
