"""Stays with inferred end times, and the per-minute weekly schedule built from them."""

from __future__ import annotations

import io
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Sequence
from zoneinfo import ZoneInfo

import numpy as np

from .clustering import Location, assign_location
from .ingest import PlacePoint, Track, format_iso8601
from .travel import DegenerateTrip, TravelEdge, Trip, estimate_trip_time, global_speed_mph, segment_trips

MINUTES_PER_DAY = 1440
WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
SCHEDULE_HEADER = "weekday,minute,location_id,count,coverage"
EVENTS_HEADER = "location_id,start,end,source_day,flagged"


@dataclass(frozen=True)
class Event:
    location: int
    start: int
    end: float
    source_day: date
    # travel time could not be subtracted (unknown or longer than the gap)
    flagged: bool = False


def _tz(tz) -> timezone | ZoneInfo:
    if tz is None or tz == "UTC":
        return timezone.utc
    return ZoneInfo(tz) if isinstance(tz, str) else tz


def _local(ts: int, tz) -> datetime:
    return datetime.fromtimestamp(ts, tz=_tz(tz))


def infer_events(
    places: Sequence[PlacePoint],
    locations: Sequence[Location],
    edges: Sequence[TravelEdge],
    track: Track,
    last_timestamp: int | None = None,
    tz="UTC",
) -> list[Event]:
    """Open an event at every located place; end it one travel time before the next.

    Travel time comes from the learned edge when there is one, otherwise
    from the trip's own estimate. The last event runs to ``last_timestamp``
    (default: the track's final fix) and is dropped if that leaves it empty.
    """
    located = []
    for place in sorted(places, key=lambda p: p.timestamp):
        loc = assign_location(place, locations)
        if loc is not None:
            located.append((place, loc))
    if not located:
        return []
    table = {(e.from_id, e.to_id): e.mean_seconds for e in edges}
    stamps = track.timestamps
    fallback = global_speed_mph(segment_trips(track, places, locations))
    if last_timestamp is None:
        last_timestamp = stamps[-1] if stamps else located[-1][0].timestamp

    events = []
    for (place, loc), (nxt, nxt_loc) in zip(located, located[1:]):
        flagged = False
        travel = table.get((loc, nxt_loc)) if loc != nxt_loc else None
        if travel is None:
            en_route = tuple(track.fixes[bisect_right(stamps, place.timestamp):bisect_left(stamps, nxt.timestamp)])
            try:
                travel = estimate_trip_time(Trip(loc, nxt_loc, place.fix, nxt.fix, en_route), fallback).seconds
            except DegenerateTrip:
                travel, flagged = 0.0, True
        end = nxt.timestamp - travel
        if end <= place.timestamp:
            end, flagged = nxt.timestamp, True
        events.append(_event(loc, place.timestamp, end, tz, flagged))
    place, loc = located[-1]
    if last_timestamp > place.timestamp:
        events.append(_event(loc, place.timestamp, last_timestamp, tz))
    return events


def _event(loc: int, start: int, end: float, tz, flagged: bool = False) -> Event:
    return Event(loc, start, float(end), _local(start, tz).date(), flagged)


def _minutes(ev: Event) -> range:
    """UTC minute indices an event occupies."""
    return range(ev.start // 60, math.floor(ev.end / 60))


def observed_dates(track: Track, events: Iterable[Event] = (), tz="UTC") -> set[date]:
    """Local dates touched by any fix or by any inferred event."""
    days = {_local(f.timestamp, tz).date() for f in track.fixes}
    for ev in events:
        minutes = _minutes(ev)
        if not minutes:
            continue
        day = _local(minutes[0] * 60, tz).date()
        last = _local(minutes[-1] * 60, tz).date()
        while day <= last:
            days.add(day)
            day += timedelta(days=1)
    return days


@dataclass
class ScheduleModel:
    counts: dict[int, np.ndarray] = field(default_factory=dict)
    coverage: np.ndarray = field(default_factory=lambda: np.zeros((7, MINUTES_PER_DAY), dtype=np.int64))

    @property
    def location_ids(self) -> list[int]:
        return sorted(self.counts)

    def count(self, weekday: int, minute: int, loc: int) -> int:
        grid = self.counts.get(loc)
        return 0 if grid is None else int(grid[weekday, minute])

    def covered(self, weekday: int, minute: int) -> bool:
        return bool(self.coverage[weekday, minute] > 0)

    def query(self, weekday: int, minute: int, loc: int) -> float:
        cov = int(self.coverage[weekday, minute])
        if cov == 0:
            return 0.0
        return self.count(weekday, minute, loc) / cov

    def probabilities(self, loc: int) -> np.ndarray:
        """(7, 1440) array of per-minute probabilities for one location."""
        grid = self.counts.get(loc)
        if grid is None:
            return np.zeros((7, MINUTES_PER_DAY))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.coverage > 0, grid / np.maximum(self.coverage, 1), 0.0)


def query(model: ScheduleModel, weekday: int, minute: int, loc: int) -> float:
    return model.query(weekday, minute, loc)


def build_schedule(events: Sequence[Event], calendar_days_observed: Iterable[date], tz="UTC") -> ScheduleModel:
    """Count, for each weekday and minute, how often each location was occupied.

    An event covers the minutes ``floor(start/60) .. floor(end/60) - 1``.
    Minutes falling on dates outside ``calendar_days_observed`` are not
    counted, and a (date, minute) slot is never counted twice.
    """
    days = set(calendar_days_observed)
    model = ScheduleModel()
    for day in days:
        model.coverage[day.weekday(), :] += 1

    occupied: dict[date, np.ndarray] = {}
    for ev in sorted(events, key=lambda e: e.start):
        for minute in _minutes(ev):
            local = _local(minute * 60, tz)
            day = local.date()
            if day not in days:
                continue
            slots = occupied.setdefault(day, np.full(MINUTES_PER_DAY, -1, dtype=np.int64))
            m = local.hour * 60 + local.minute
            if slots[m] < 0:
                slots[m] = ev.location

    for day, slots in occupied.items():
        wd = day.weekday()
        for loc in np.unique(slots[slots >= 0]):
            grid = model.counts.setdefault(int(loc), np.zeros((7, MINUTES_PER_DAY), dtype=np.int64))
            grid[wd] += slots == loc
    return model


def segment_averages(model: ScheduleModel, segment_minutes: int = 30) -> dict[tuple[int, int], list[tuple[int, float]]]:
    """Mean probability of each location over fixed-length time segments.

    Keys are (weekday, segment index); locations with mean 0 are left out.
    """
    if segment_minutes <= 0 or MINUTES_PER_DAY % segment_minutes:
        raise ValueError(f"segment length must divide {MINUTES_PER_DAY}, got {segment_minutes}")
    n_seg = MINUTES_PER_DAY // segment_minutes
    means = {
        loc: model.probabilities(loc).reshape(7, n_seg, segment_minutes).mean(axis=2)
        for loc in model.location_ids
    }
    grid = {}
    for wd in range(7):
        for seg in range(n_seg):
            grid[(wd, seg)] = [
                (loc, float(means[loc][wd, seg])) for loc in model.location_ids if means[loc][wd, seg] > 0
            ]
    return grid


# -- serialization ---------------------------------------------------------


def schedule_to_csv(model: ScheduleModel) -> str:
    """One row per occupied (weekday, minute, location); covered but empty
    minutes get a row with a blank location so coverage survives a reload."""
    out = io.StringIO()
    out.write(SCHEDULE_HEADER + "\n")
    locs = model.location_ids
    for wd in range(7):
        for m in range(MINUTES_PER_DAY):
            cov = int(model.coverage[wd, m])
            if cov == 0:
                continue
            wrote = False
            for loc in locs:
                c = int(model.counts[loc][wd, m])
                if c:
                    out.write(f"{wd},{m},{loc},{c},{cov}\n")
                    wrote = True
            if not wrote:
                out.write(f"{wd},{m},,0,{cov}\n")
    return out.getvalue()


def schedule_from_csv(text: str) -> ScheduleModel:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0].strip() != SCHEDULE_HEADER:
        raise ValueError(f"expected header {SCHEDULE_HEADER!r}")
    model = ScheduleModel()
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 5:
            raise ValueError(f"malformed schedule row, line {lineno}")
        wd, m, cov = int(parts[0]), int(parts[1]), int(parts[4])
        model.coverage[wd, m] = cov
        if parts[2]:
            grid = model.counts.setdefault(int(parts[2]), np.zeros((7, MINUTES_PER_DAY), dtype=np.int64))
            grid[wd, m] = int(parts[3])
    return model


def events_to_csv(events: Sequence[Event]) -> str:
    out = io.StringIO()
    out.write(EVENTS_HEADER + "\n")
    for ev in events:
        out.write(
            f"{ev.location},{format_iso8601(ev.start)},{format_iso8601(math.floor(ev.end))},"
            f"{ev.source_day.isoformat()},{int(ev.flagged)}\n"
        )
    return out.getvalue()


def weekday_minute(ts: int, tz="UTC") -> tuple[int, int]:
    local = _local(ts, tz)
    return local.weekday(), local.hour * 60 + local.minute

