"""Replaying a track against a calendar and raising lateness alerts."""

from __future__ import annotations

import csv
import io
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .clustering import Location
from .geo import Fix
from .ingest import Track, format_iso8601, parse_iso8601
from .travel import TravelEdge, travel_time_from

TICK_SECONDS = 15
LOOKAHEAD_SECONDS = 7200
WEEK_SECONDS = 7 * 86400

CALENDAR_HEADER = ["start_iso8601", "location_id", "title", "recurs_weekly"]
ALERTS_HEADER = "issued_at_iso8601,appointment_title,appointment_start,travel_seconds,slack_seconds"


class CalendarError(ValueError):
    pass


@dataclass(frozen=True)
class Appointment:
    title: str
    location: int
    start: int
    recurs_weekly: bool = False


@dataclass(frozen=True)
class Alert:
    appointment: Appointment
    issued_at: int
    travel_seconds: float
    slack_seconds: float


def check(
    now: int,
    current_fix: Fix,
    calendar: Iterable[Appointment],
    edges: Sequence[TravelEdge],
    locations: Sequence[Location],
    lookahead: int = LOOKAHEAD_SECONDS,
    buffer: float = 0.0,
) -> list[Alert]:
    """Alerts for appointments starting within ``lookahead`` that the user would miss.

    An alert is raised when ``now + travel + buffer > start``. Appointments
    starting exactly at ``now`` are not considered.
    """
    alerts = []
    for appt in calendar:
        if not now < appt.start <= now + lookahead:
            continue
        travel = travel_time_from(current_fix.point, appt.location, edges, locations)
        slack = appt.start - now - travel
        if slack < buffer:
            alerts.append(Alert(appt, now, travel, slack))
    return alerts


def expand_calendar(calendar: Iterable[Appointment], until: int) -> list[Appointment]:
    """Unroll weekly appointments into one-off occurrences starting before ``until``."""
    out = []
    for appt in calendar:
        if not appt.recurs_weekly:
            out.append(appt)
            continue
        start = appt.start
        while start <= until:
            out.append(Appointment(appt.title, appt.location, start, False))
            start += WEEK_SECONDS
    out.sort(key=lambda a: (a.start, a.title, a.location))
    return out


def replay(
    track: Track,
    calendar: Sequence[Appointment],
    edges: Sequence[TravelEdge],
    locations: Sequence[Location],
    tick: int = TICK_SECONDS,
    lookahead: int = LOOKAHEAD_SECONDS,
    buffer: float = 0.0,
) -> list[Alert]:
    """Run the alert check on a simulated clock from the first to the last fix.

    Each appointment alerts once per continuous stretch of predicted
    lateness and re-arms as soon as the user is back on time.
    """
    if not track.fixes or not calendar:
        return []
    if tick <= 0:
        raise ValueError("tick must be positive")
    stamps = track.timestamps
    t0, t1 = stamps[0], stamps[-1]
    appointments = expand_calendar(calendar, t1 + lookahead)
    late: set[Appointment] = set()
    log: list[Alert] = []
    lo = 0
    for now in range(t0, t1 + 1, tick):
        fix = track.fixes[bisect_right(stamps, now) - 1]
        # appointments are sorted by start; skip the ones already past
        while lo < len(appointments) and appointments[lo].start <= now:
            late.discard(appointments[lo])
            lo += 1
        window = []
        for appt in appointments[lo:]:
            if appt.start > now + lookahead:
                break
            window.append(appt)
        if not window:
            continue
        fired = {a.appointment: a for a in check(now, fix, window, edges, locations, lookahead, buffer)}
        for appt in window:
            if appt in fired:
                if appt not in late:
                    log.append(fired[appt])
                    late.add(appt)
            else:
                late.discard(appt)
    return log


# -- file formats ----------------------------------------------------------


def read_calendar(text: str, locations: Optional[Sequence[Location]] = None) -> list[Appointment]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return []
    if [h.strip() for h in header] != CALENDAR_HEADER:
        raise CalendarError(f"bad calendar header, expected {','.join(CALENDAR_HEADER)}")
    known = None if locations is None else {loc.id for loc in locations}
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise CalendarError(f"expected 4 fields, line {lineno}")
        try:
            start = parse_iso8601(row[0])
            loc = int(row[1])
        except ValueError as exc:
            raise CalendarError(f"{exc}, line {lineno}") from None
        if row[3].strip() not in ("0", "1"):
            raise CalendarError(f"recurs_weekly must be 0 or 1, line {lineno}")
        if known is not None and loc not in known:
            raise CalendarError(f"unknown location {loc}, line {lineno}")
        out.append(Appointment(row[2], loc, start, row[3].strip() == "1"))
    return out


def calendar_to_csv(calendar: Iterable[Appointment]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CALENDAR_HEADER)
    for appt in calendar:
        writer.writerow([format_iso8601(appt.start), appt.location, appt.title, int(appt.recurs_weekly)])
    return out.getvalue()


def alerts_to_csv(alerts: Iterable[Alert]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    out.write(ALERTS_HEADER + "\n")
    for a in alerts:
        writer.writerow([
            format_iso8601(a.issued_at),
            a.appointment.title,
            format_iso8601(a.appointment.start),
            f"{a.travel_seconds:.1f}",
            f"{a.slack_seconds:.1f}",
        ])
    return out.getvalue()
