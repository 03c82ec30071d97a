"""End-to-end learning: track -> places -> locations -> travel edges -> schedule."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .clustering import (
    DEFAULT_RADII,
    Location,
    RadiusSweep,
    cluster_at_radius,
    locations_from_csv,
    locations_to_csv,
    sweep_radii,
    sweep_to_csv,
)
from .ingest import DEFAULT_GAP_SECONDS, DEFAULT_SPEED_THRESHOLD_MPH, PlacePoint, Track, extract_places, filter_moving
from .schedule import (
    Event,
    ScheduleModel,
    build_schedule,
    events_to_csv,
    infer_events,
    observed_dates,
    schedule_to_csv,
)
from .travel import TravelEdge, Trip, build_edges, edges_from_csv, edges_to_csv, segment_trips


@dataclass
class Learned:
    moving: Track
    places: list[PlacePoint]
    sweep: RadiusSweep
    locations: list[Location]
    trips: list[Trip]
    edges: list[TravelEdge]
    events: list[Event]
    schedule: ScheduleModel


def learn(
    track: Track,
    gap_seconds: float = DEFAULT_GAP_SECONDS,
    speed_threshold: float = DEFAULT_SPEED_THRESHOLD_MPH,
    radii: Sequence[float] = DEFAULT_RADII,
    seed: int = 0,
    tz: str = "UTC",
    workers: int | None = None,
) -> Learned:
    moving = filter_moving(track, speed_threshold)
    places = extract_places(moving, gap_seconds)
    sweep = sweep_radii(places, radii, seed, workers=workers)
    # reuse the sweep's own seed so the final clustering is the one that was counted
    locations = cluster_at_radius(places, sweep.chosen_radius, sweep.seed_for(sweep.chosen_radius))
    trips = segment_trips(moving, places, locations)
    edges = build_edges(trips)
    last = track.fixes[-1].timestamp if track.fixes else None
    events = infer_events(places, locations, edges, moving, last_timestamp=last, tz=tz)
    days = observed_dates(track, events, tz)
    schedule = build_schedule(events, days, tz)
    return Learned(moving, places, sweep, locations, trips, edges, events, schedule)


def write_models(learned: Learned, out_dir, figures: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "locations.csv": locations_to_csv(learned.locations),
        "edges.csv": edges_to_csv(learned.edges),
        "schedule.csv": schedule_to_csv(learned.schedule),
        "sweep.csv": sweep_to_csv(learned.sweep),
        "events.csv": events_to_csv(learned.events),
    }
    written = []
    for name, text in files.items():
        path = out / name
        path.write_text(text, encoding="utf-8", newline="\n")
        written.append(path)
    if figures:
        from .plots import plot_radius_sweep

        path = out / "sweep.png"
        plot_radius_sweep(learned.sweep, path)
        written.append(path)
    return written


def load_models(models_dir) -> tuple[list[Location], list[TravelEdge]]:
    d = Path(models_dir)
    locations = locations_from_csv((d / "locations.csv").read_text(encoding="utf-8"))
    edges = edges_from_csv((d / "edges.csv").read_text(encoding="utf-8"))
    return locations, edges
