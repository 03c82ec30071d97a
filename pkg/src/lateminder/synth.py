"""Synthetic GPS tracks from a scripted weekly routine, with ground truth.

The user follows a list of weekly stays. After a stay ends they drive a
straight line to the next attended stay at the leg speed, sampled at 1 Hz,
and wait there if they arrive early. During stays the receiver is either
silent (indoor dropout) or reports slow jitter.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Optional

import numpy as np

from .geo import MPS_TO_MPH, Fix, GeoPoint, from_local, haversine_distance, to_local
from .ingest import Track, format_iso8601

DAY_SECONDS = 86400
WEEKDAY_NAMES = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
TRUTH_HEADER = "kind,label,to_label,start_iso8601,end_iso8601,lat,lon"


class InfeasibleRoutine(ValueError):
    pass


@dataclass(frozen=True)
class PatternEntry:
    weekday: int
    start_minute: int
    end_minute: int
    label: str
    attendance: float = 1.0
    # speed of the leg arriving here; falls back to the routine speed
    speed_mph: Optional[float] = None

    def describe(self) -> str:
        return (
            f"{WEEKDAY_NAMES[self.weekday]} {self.start_minute // 60:02d}:{self.start_minute % 60:02d}-"
            f"{self.end_minute // 60:02d}:{self.end_minute % 60:02d} {self.label}"
        )


@dataclass
class RoutineSpec:
    locations: dict[str, GeoPoint]
    pattern: list[PatternEntry]
    speed_mph: float = 30.0
    noise_m: float = 0.0
    dropout: bool = True
    weeks: int = 1
    seed: int = 0
    start_date: date = date(2004, 5, 10)
    stay_fix_interval: int = 30

    def __post_init__(self):
        if self.noise_m < 0:
            raise ValueError("noise must be non-negative")
        if self.weeks < 1:
            raise ValueError("weeks must be at least 1")
        if self.speed_mph <= 0:
            raise ValueError("speed must be positive")
        if self.start_date.weekday() != 0:
            raise ValueError("start_date must be a Monday")
        for e in self.pattern:
            if e.label not in self.locations:
                raise ValueError(f"unknown location {e.label!r} in {e.describe()}")
            if not 0 <= e.start_minute < e.end_minute <= 1440:
                raise ValueError(f"bad time range in {e.describe()}")
            if not 0 <= e.attendance <= 1:
                raise ValueError(f"attendance must be in [0, 1] in {e.describe()}")
        by_day = sorted(self.pattern, key=lambda e: (e.weekday, e.start_minute))
        for a, b in zip(by_day, by_day[1:]):
            if a.weekday == b.weekday and b.start_minute < a.end_minute:
                raise ValueError(f"overlapping entries {a.describe()} and {b.describe()}")


@dataclass(frozen=True)
class Stay:
    label: str
    start: int
    end: int


@dataclass(frozen=True)
class Leg:
    from_label: str
    to_label: str
    depart: int
    arrive: int

    @property
    def seconds(self) -> int:
        return self.arrive - self.depart


@dataclass
class GroundTruth:
    locations: dict[str, GeoPoint]
    stays: list[Stay] = field(default_factory=list)
    legs: list[Leg] = field(default_factory=list)
    # (week, entry index) pairs that were attended
    attended: list[tuple[int, int]] = field(default_factory=list)


def _epoch(d: date) -> int:
    return int(datetime(d.year, d.month, d.day, tzinfo=timezone.utc).timestamp())


def _schedule(spec: RoutineSpec, rng: np.random.Generator):
    """Attended entries as (absolute start, absolute end, entry, week, index)."""
    ordered = sorted(enumerate(spec.pattern), key=lambda p: (p[1].weekday, p[1].start_minute))
    base = _epoch(spec.start_date)
    timeline = []
    for week in range(spec.weeks):
        for idx, entry in ordered:
            # one draw per entry per week keeps the stream aligned whatever the outcome
            draw = rng.random()
            if draw >= entry.attendance:
                continue
            day0 = base + (week * 7 + entry.weekday) * DAY_SECONDS
            timeline.append((day0 + entry.start_minute * 60, day0 + entry.end_minute * 60, entry, week, idx))
    return timeline


def _noisy(point: GeoPoint, sigma: float, rng: np.random.Generator) -> GeoPoint:
    if sigma == 0:
        return point
    dx, dy = rng.normal(0.0, sigma, size=2)
    return from_local(point.lat, point.lon, float(dx), float(dy))


def _quantize(point: GeoPoint) -> GeoPoint:
    return GeoPoint(round(point.lat, 6), round(point.lon, 6))


def leg_seconds(a: GeoPoint, b: GeoPoint, speed_mph: float) -> int:
    dist = haversine_distance(a, b)
    if dist == 0:
        return 0
    return max(1, round(dist / (speed_mph / MPS_TO_MPH)))


def generate(spec: RoutineSpec) -> tuple[Track, GroundTruth]:
    rng = np.random.default_rng(spec.seed)
    timeline = _schedule(spec, rng)
    truth = GroundTruth(dict(spec.locations))
    fixes: list[Fix] = []
    if not timeline:
        return Track(), truth

    def emit(point: GeoPoint, ts: int, speed: float):
        fixes.append(Fix(_quantize(_noisy(point, spec.noise_m, rng)), ts, round(speed, 2)))

    def stay_fixes(label: str, start: int, end: int):
        if spec.dropout:
            return
        center = spec.locations[label]
        for ts in range(start + spec.stay_fix_interval, end, spec.stay_fix_interval):
            emit(center, ts, float(rng.uniform(0.0, 0.5)))

    stay_label, stay_start = timeline[0][2].label, timeline[0][0]
    for (s0, e0, entry0, _, _), (s1, e1, entry1, _, _) in zip(timeline, timeline[1:]):
        src, dst = spec.locations[entry0.label], spec.locations[entry1.label]
        speed = entry1.speed_mph or spec.speed_mph
        n = leg_seconds(src, dst, speed)
        if n == 0:
            continue  # same place: the stay simply carries on
        depart = e0
        arrive = depart + n
        if arrive > s1:
            raise InfeasibleRoutine(
                f"leg to {entry1.describe()} takes {n} s but only {s1 - depart} s are available"
            )
        stay_fixes(stay_label, stay_start, depart)
        truth.stays.append(Stay(stay_label, stay_start, depart))
        true_speed = haversine_distance(src, dst) / n * MPS_TO_MPH
        x1, y1 = to_local(src.lat, src.lon, np.array([dst.lat]), np.array([dst.lon]))
        for k in range(n + 1):
            if k == 0:
                pos = src
            elif k == n:
                pos = dst
            else:
                pos = from_local(src.lat, src.lon, float(x1[0]) * k / n, float(y1[0]) * k / n)
            emit(pos, depart + k, true_speed)
        truth.legs.append(Leg(entry0.label, entry1.label, depart, arrive))
        stay_label, stay_start = entry1.label, arrive
    last_end = timeline[-1][1]
    stay_fixes(stay_label, stay_start, last_end)
    truth.stays.append(Stay(stay_label, stay_start, last_end))
    truth.attended = [(week, idx) for _, _, _, week, idx in timeline]
    return Track(fixes), truth


# -- config and output files -----------------------------------------------


def _parse_hhmm(text: str) -> int:
    hh, mm = text.split(":")
    return int(hh) * 60 + int(mm)


def parse_routine(text: str) -> RoutineSpec:
    """Read a routine from an INI-style file.

    ::

        [routine]
        weeks = 4
        seed = 7
        noise_m = 30
        dropout = yes
        speed_mph = 30

        [locations]
        home = 33.7490, -84.3880

        [pattern]
        entries =
            mon 00:00-08:00 home
            mon 09:00-17:00 office 0.75 25
    """
    cfg = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cfg.read_string(text)
    locations = {}
    for label, value in cfg.items("locations"):
        lat, lon = (float(v) for v in value.split(","))
        locations[label] = GeoPoint(lat, lon)
    pattern = []
    for line in cfg.get("pattern", "entries").strip().splitlines():
        parts = line.split()
        if not parts:
            continue
        if len(parts) < 3:
            raise ValueError(f"bad pattern entry {line!r}")
        day = WEEKDAY_NAMES.index(parts[0].lower()[:3])
        start, end = (_parse_hhmm(t) for t in parts[1].split("-"))
        attendance = float(parts[3]) if len(parts) > 3 else 1.0
        speed = float(parts[4]) if len(parts) > 4 else None
        pattern.append(PatternEntry(day, start, end, parts[2], attendance, speed))
    sect = cfg["routine"] if cfg.has_section("routine") else {}
    kwargs = {}
    if "weeks" in sect:
        kwargs["weeks"] = int(sect["weeks"])
    if "seed" in sect:
        kwargs["seed"] = int(sect["seed"])
    if "noise_m" in sect:
        kwargs["noise_m"] = float(sect["noise_m"])
    if "speed_mph" in sect:
        kwargs["speed_mph"] = float(sect["speed_mph"])
    if "dropout" in sect:
        kwargs["dropout"] = cfg.getboolean("routine", "dropout")
    if "start_date" in sect:
        kwargs["start_date"] = date.fromisoformat(sect["start_date"])
    if "stay_fix_interval" in sect:
        kwargs["stay_fix_interval"] = int(sect["stay_fix_interval"])
    return RoutineSpec(locations, pattern, **kwargs)


def truth_to_csv(truth: GroundTruth) -> str:
    out = io.StringIO()
    out.write(TRUTH_HEADER + "\n")
    for label, p in sorted(truth.locations.items()):
        out.write(f"location,{label},,,,{p.lat:.6f},{p.lon:.6f}\n")
    for s in truth.stays:
        out.write(f"stay,{s.label},,{format_iso8601(s.start)},{format_iso8601(s.end)},,\n")
    for leg in truth.legs:
        out.write(
            f"leg,{leg.from_label},{leg.to_label},{format_iso8601(leg.depart)},{format_iso8601(leg.arrive)},,\n"
        )
    return out.getvalue()
