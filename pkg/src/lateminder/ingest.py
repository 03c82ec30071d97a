"""Turning raw GPS logs into tracks, and tracks into candidate places."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import IO, Iterable, Union

from .geo import Fix, GeoPoint, derived_speed

KNOTS_TO_MPH = 1.150779
DEFAULT_SPEED_THRESHOLD_MPH = 1.0
DEFAULT_GAP_SECONDS = 600

CSV_HEADER = ["timestamp", "lat", "lon", "speed_mph"]

Source = Union[str, bytes, IO[str], IO[bytes], Iterable[str], Iterable[bytes]]


class TrackFormatError(ValueError):
    pass


class NoValidFixes(TrackFormatError):
    pass


@dataclass
class Track:
    fixes: list[Fix] = field(default_factory=list)
    # sentences dropped by the NMEA parser; not part of equality
    skipped: int = field(default=0, compare=False)

    def __post_init__(self):
        for prev, cur in zip(self.fixes, self.fixes[1:]):
            if cur.timestamp <= prev.timestamp:
                raise ValueError(
                    f"track timestamps must be strictly increasing ({prev.timestamp} -> {cur.timestamp})"
                )

    def __len__(self):
        return len(self.fixes)

    def __iter__(self):
        return iter(self.fixes)

    def __getitem__(self, i):
        return self.fixes[i]

    @property
    def timestamps(self) -> list[int]:
        return [f.timestamp for f in self.fixes]


@dataclass(frozen=True)
class PlacePoint:
    fix: Fix
    gap_seconds: float

    @property
    def lat(self) -> float:
        return self.fix.lat

    @property
    def lon(self) -> float:
        return self.fix.lon

    @property
    def timestamp(self) -> int:
        return self.fix.timestamp


def _lines(source: Source) -> Iterable[str]:
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        source = io.StringIO(source)
    for line in source:
        if isinstance(line, bytes):
            line = line.decode("utf-8", errors="replace")
        yield line.rstrip("\r\n")


# -- NMEA-0183 -------------------------------------------------------------


def nmea_checksum(body: str) -> int:
    """XOR of every character between ``$`` and ``*``."""
    value = 0
    for ch in body:
        value ^= ord(ch)
    return value


def _nmea_coord(value: str, hemi: str, degree_digits: int) -> float:
    if len(value) < degree_digits + 2 or len(hemi) != 1 or hemi not in "NSEW":
        raise ValueError(f"bad coordinate {value!r}{hemi}")
    degrees = int(value[:degree_digits])
    minutes = float(value[degree_digits:])
    if not 0 <= minutes < 60:
        raise ValueError(f"bad minutes in {value!r}")
    coord = degrees + minutes / 60.0
    return -coord if hemi in "SW" else coord


def _nmea_timestamp(hhmmss: str, ddmmyy: str) -> int:
    if len(hhmmss) < 6 or len(ddmmyy) != 6:
        raise ValueError("bad date/time")
    year = int(ddmmyy[4:6])
    # two-digit years: 80-99 -> 1900s, everything else -> 2000s
    year += 1900 if year >= 80 else 2000
    stamp = datetime(
        year, int(ddmmyy[2:4]), int(ddmmyy[0:2]),
        int(hhmmss[0:2]), int(hhmmss[2:4]), int(hhmmss[4:6]),
        tzinfo=timezone.utc,
    )
    return int(stamp.timestamp())


def parse_gprmc(sentence: str) -> Fix | None:
    """Decode one GPRMC sentence.

    Returns ``None`` for a well-formed sentence that carries no fix (status
    'V'); raises ``ValueError`` for checksum or field errors.
    """
    sentence = sentence.strip()
    if not sentence.startswith("$") or "*" not in sentence:
        raise ValueError("missing checksum")
    body, _, given = sentence[1:].partition("*")
    if nmea_checksum(body) != int(given[:2], 16):
        raise ValueError("checksum mismatch")
    fields = body.split(",")
    if fields[0] != "GPRMC" or len(fields) < 10:
        raise ValueError("not a GPRMC sentence")
    if fields[2] != "A":
        return None
    lat = _nmea_coord(fields[3], fields[4], 2)
    lon = _nmea_coord(fields[5], fields[6], 3)
    speed = float(fields[7]) * KNOTS_TO_MPH if fields[7] else None
    ts = _nmea_timestamp(fields[1], fields[9])
    return Fix(GeoPoint(lat, lon), ts, speed)


def parse_nmea(source: Source) -> Track:
    """Parse GPRMC sentences into a track.

    Other sentence types are ignored. Corrupt, void and unparseable GPRMC
    sentences are skipped and counted in ``Track.skipped``. Repeated
    timestamps keep the first occurrence.
    """
    fixes: list[Fix] = []
    skipped = 0
    seen_lines = 0
    for line in _lines(source):
        line = line.strip()
        if not line:
            continue
        seen_lines += 1
        if not line.startswith("$GPRMC"):
            continue
        try:
            fix = parse_gprmc(line)
        except (ValueError, IndexError):
            skipped += 1
            continue
        if fix is None:
            skipped += 1
            continue
        fixes.append(fix)
    if seen_lines and not fixes:
        raise NoValidFixes("no valid fixes")
    by_time: dict[int, Fix] = {}
    for fix in fixes:
        by_time.setdefault(fix.timestamp, fix)
    ordered = [by_time[t] for t in sorted(by_time)]
    return Track(ordered, skipped=skipped)


# -- canonical CSV ---------------------------------------------------------


def parse_iso8601(text: str) -> int:
    """ISO-8601 timestamp to integer UTC seconds (fractions are dropped)."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    stamp = datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return math.floor(stamp.timestamp())


def format_iso8601(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_csv(source: Source) -> Track:
    reader = csv.reader(_lines(source))
    try:
        header = next(reader)
    except StopIteration:
        raise TrackFormatError("empty input, expected header line 1") from None
    if [h.strip() for h in header] != CSV_HEADER:
        raise TrackFormatError(f"bad header, expected {','.join(CSV_HEADER)}, line 1")
    fixes: list[Fix] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 4:
            raise TrackFormatError(f"expected 4 fields, got {len(row)}, line {lineno}")
        try:
            ts = parse_iso8601(row[0])
            lat = float(row[1])
            lon = float(row[2])
            speed = float(row[3]) if row[3].strip() else None
        except ValueError as exc:
            raise TrackFormatError(f"malformed row ({exc}), line {lineno}") from None
        if not -90.0 <= lat <= 90.0:
            raise TrackFormatError(f"latitude out of range, line {lineno}")
        if not -180.0 < lon <= 180.0:
            raise TrackFormatError(f"longitude out of range, line {lineno}")
        try:
            fix = Fix(GeoPoint(lat, lon), ts, speed)
        except ValueError as exc:
            raise TrackFormatError(f"{exc}, line {lineno}") from None
        if fixes and ts <= fixes[-1].timestamp:
            raise TrackFormatError(f"non-increasing timestamp, line {lineno}")
        fixes.append(fix)
    return Track(fixes)


def emit_csv(track: Track) -> bytes:
    out = io.StringIO()
    out.write(",".join(CSV_HEADER) + "\n")
    for fix in track.fixes:
        speed = "" if fix.speed is None else f"{fix.speed:.2f}"
        out.write(f"{format_iso8601(fix.timestamp)},{fix.lat:.6f},{fix.lon:.6f},{speed}\n")
    return out.getvalue().encode("utf-8")


def read_track(path, fmt: str = "auto") -> Track:
    """Load a track file; ``fmt`` is ``csv``, ``nmea`` or ``auto`` (sniffed)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if fmt == "auto":
        head = data.lstrip()[:1]
        fmt = "nmea" if head == b"$" else "csv"
    if fmt == "nmea":
        return parse_nmea(data)
    if fmt == "csv":
        return parse_csv(data)
    raise ValueError(f"unknown track format {fmt!r}")


# -- place extraction ------------------------------------------------------


def effective_speeds(fixes: list[Fix]) -> list[float]:
    """Receiver speed where present, otherwise derived from the neighbouring fix."""
    speeds = []
    for i, fix in enumerate(fixes):
        if fix.speed is not None:
            speeds.append(fix.speed)
        elif i > 0:
            speeds.append(derived_speed(fixes[i - 1], fix))
        elif len(fixes) > 1:
            speeds.append(derived_speed(fix, fixes[1]))
        else:
            speeds.append(0.0)
    return speeds


def filter_moving(track: Track, threshold_mph: float = DEFAULT_SPEED_THRESHOLD_MPH) -> Track:
    """Keep fixes moving at ``threshold_mph`` or faster.

    Derived speeds are written into the kept fixes so a second pass sees the
    same speeds as the first.
    """
    speeds = effective_speeds(track.fixes)
    kept = [
        fix if fix.speed is not None else replace(fix, speed=speed)
        for fix, speed in zip(track.fixes, speeds)
        if speed >= threshold_mph
    ]
    return Track(kept)


def extract_places(track: Track, gap_seconds: float = DEFAULT_GAP_SECONDS) -> list[PlacePoint]:
    fixes = track.fixes
    places = []
    for cur, nxt in zip(fixes, fixes[1:]):
        gap = nxt.timestamp - cur.timestamp
        if gap >= gap_seconds:
            places.append(PlacePoint(cur, float(gap)))
    if fixes:
        places.append(PlacePoint(fixes[-1], math.inf))
    return places
