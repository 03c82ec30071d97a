"""Static renderings of a learned schedule, plus GeoJSON export of locations."""

from __future__ import annotations

import json
import string
from typing import Optional, Sequence
from xml.sax.saxutils import escape

from .clustering import Location
from .ingest import Track
from .schedule import MINUTES_PER_DAY, WEEKDAYS

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939",
)

CELL_W = 120.0
ROW_H = 12.0
LEFT = 48.0
TOP = 24.0
LEGEND_ROW = 18.0

Grid = dict  # (weekday, segment) -> [(location id, mean probability)]


def color_for(loc: int, palette: Sequence[str] = PALETTE) -> str:
    return palette[loc % len(palette)]


def letter_for(loc: int) -> str:
    letters = string.ascii_uppercase
    return letters[loc % len(letters)]


def _segments(grid: Grid) -> int:
    return 1 + max((seg for _, seg in grid), default=-1)


def _locations(grid: Grid) -> list[int]:
    return sorted({loc for cell in grid.values() for loc, _ in cell})


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


def render_schedule_svg(
    grid: Grid,
    segment_minutes: int = 30,
    palette: Sequence[str] = PALETTE,
    labels: Optional[dict[int, str]] = None,
) -> str:
    """Week-by-segment block chart as an SVG 1.1 document.

    Each cell holds one block per location, left to right in id order, with
    width proportional to the location's mean probability in that segment.
    """
    n_rows = _segments(grid) if grid else 0
    if grid and n_rows * segment_minutes != MINUTES_PER_DAY:
        raise ValueError("grid does not match the segment length")
    locs = _locations(grid)
    labels = labels or {}
    width = LEFT + 7 * CELL_W + 8
    body_h = n_rows * ROW_H
    height = TOP + body_h + 12 + LEGEND_ROW * max(1, len(locs))
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        '<g font-family="sans-serif" font-size="10">',
    ]
    for wd in range(7):
        x = LEFT + wd * CELL_W
        out.append(f'<text x="{_fmt(x + CELL_W / 2)}" y="{_fmt(TOP - 8)}" text-anchor="middle">{WEEKDAYS[wd]}</text>')
    for seg in range(n_rows):
        minute = seg * segment_minutes
        if minute % 60 == 0:
            y = TOP + seg * ROW_H
            out.append(f'<text x="{_fmt(LEFT - 4)}" y="{_fmt(y + ROW_H - 2)}" text-anchor="end">{minute // 60:02d}:00</text>')
    for (wd, seg), cell in sorted(grid.items()):
        x0 = LEFT + wd * CELL_W
        y = TOP + seg * ROW_H
        out.append(
            f'<rect class="cell" data-weekday="{wd}" data-segment="{seg}" x="{_fmt(x0)}" y="{_fmt(y)}" '
            f'width="{_fmt(CELL_W)}" height="{_fmt(ROW_H)}" fill="none" stroke="#dddddd" stroke-width="0.5"/>'
        )
        x = x0
        for loc, p in sorted(cell):
            w = CELL_W * p
            out.append(
                f'<rect class="block" data-weekday="{wd}" data-segment="{seg}" data-location="{loc}" '
                f'x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(ROW_H)}" fill="{color_for(loc, palette)}"/>'
            )
            x += w
    ly = TOP + body_h + 12
    for i, loc in enumerate(locs):
        y = ly + i * LEGEND_ROW
        name = escape(labels.get(loc, f"location {loc}"))
        out.append(
            f'<rect class="legend" data-location="{loc}" x="{_fmt(LEFT)}" y="{_fmt(y)}" width="12" height="12" '
            f'fill="{color_for(loc, palette)}"/>'
        )
        out.append(f'<text x="{_fmt(LEFT + 18)}" y="{_fmt(y + 10)}">{name}</text>')
    if not locs:
        out.append(f'<text x="{_fmt(LEFT)}" y="{_fmt(ly + 10)}">no locations</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_schedule_ascii(grid: Grid, segment_minutes: int = 30) -> str:
    """Plain-text version: each location letter repeated once per tenth of probability."""
    n_rows = _segments(grid)
    lines = ["time  " + " ".join(f"{d:<10}" for d in WEEKDAYS)]
    for seg in range(n_rows):
        minute = seg * segment_minutes
        cells = []
        for wd in range(7):
            text = "".join(letter_for(loc) * round(p * 10) for loc, p in sorted(grid.get((wd, seg), [])))
            cells.append(f"{text[:10]:<10}")
        lines.append(f"{minute // 60:02d}:{minute % 60:02d} " + " ".join(cells))
    locs = _locations(grid)
    if locs:
        lines.append("")
        lines.extend(f"{letter_for(loc)} = location {loc}" for loc in locs)
    return "\n".join(line.rstrip() for line in lines) + "\n"


def export_geojson(locations: Sequence[Location], track: Optional[Track] = None) -> dict:
    """FeatureCollection with one Point per location (lon, lat order) and an optional track LineString."""
    features = []
    for loc in sorted(locations, key=lambda l: l.id):
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [round(loc.lon, 6), round(loc.lat, 6)]},
            "properties": {"id": loc.id, "radius_m": round(loc.radius, 1), "member_count": len(loc.members)},
        })
    if track is not None and len(track) >= 2:
        features.append({
            "type": "Feature",
            "geometry": {
                "type": "LineString",
                "coordinates": [[round(f.lon, 6), round(f.lat, 6)] for f in track.fixes],
            },
            "properties": {"kind": "track", "n_fixes": len(track)},
        })
    return {"type": "FeatureCollection", "features": features}


def geojson_dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
