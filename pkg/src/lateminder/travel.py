"""Travel times between learned locations.

Trips run from the place point at one location to the next place point at a
different location. Because the signal usually comes back only some time
after departure, a trip's duration is reconstructed as

    distance(A, B) / speed(B..C) + (t_C - t_B)

with A the departure place, C the arrival place and B the first fix after A
that is actually moving.
"""

from __future__ import annotations

import io
from bisect import bisect_left, bisect_right
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional, Sequence

from .clustering import Location, assign_location
from .geo import MPS_TO_MPH, Fix, HasLatLon, haversine_distance
from .ingest import PlacePoint, Track

DETOUR_FACTOR = 1.5
MOVING_MPH = 1.0

EDGES_HEADER = "from_id,to_id,mean_seconds,n_samples,mean_speed_mph"


class UntrainedModelError(RuntimeError):
    pass


class DegenerateTrip(ValueError):
    pass


@dataclass(frozen=True)
class Trip:
    from_loc: int
    to_loc: int
    depart_fix: Fix
    arrive_fix: Fix
    en_route: tuple[Fix, ...] = ()

    def __post_init__(self):
        if self.depart_fix.timestamp >= self.arrive_fix.timestamp:
            raise ValueError("trip must arrive after it departs")


@dataclass(frozen=True)
class TripEstimate:
    seconds: float
    path_m: float
    straight_m: float
    low_confidence: bool = False

    @property
    def speed_mph(self) -> float:
        """Effective straight-line speed, the quantity on-the-fly estimates divide by."""
        return self.straight_m / self.seconds * MPS_TO_MPH if self.seconds > 0 else 0.0


@dataclass(frozen=True)
class TravelEdge:
    from_id: int
    to_id: int
    mean_seconds: float
    n_samples: int
    mean_speed_mph: float


def _located(places: Sequence[PlacePoint], locations: Sequence[Location]):
    for place in places:
        loc = assign_location(place, locations)
        if loc is not None:
            yield place, loc


def _between(track: Track, stamps: list[int], t0: int, t1: int) -> tuple[Fix, ...]:
    return tuple(track.fixes[bisect_right(stamps, t0):bisect_left(stamps, t1)])


def segment_trips(track: Track, places: Sequence[PlacePoint], locations: Sequence[Location]) -> list[Trip]:
    """Trips between consecutive located places whose locations differ."""
    trips = []
    stamps = track.timestamps
    located = list(_located(sorted(places, key=lambda p: p.timestamp), locations))
    for (a, loc_a), (c, loc_c) in zip(located, located[1:]):
        if loc_a == loc_c:
            continue
        trips.append(Trip(loc_a, loc_c, a.fix, c.fix, _between(track, stamps, a.timestamp, c.timestamp)))
    return trips


def path_length(fixes: Sequence[HasLatLon]) -> float:
    return sum(haversine_distance(p, q) for p, q in zip(fixes, fixes[1:]))


def estimate_trip_time(trip: Trip, fallback_speed_mph: float | None = None) -> TripEstimate:
    """Gap-compensated trip duration in seconds.

    Without any moving fix en route the estimate falls back to straight-line
    distance at ``fallback_speed_mph`` and is flagged low-confidence.
    """
    a, c = trip.depart_fix, trip.arrive_fix
    straight = haversine_distance(a, c)
    b_index = next(
        (i for i, f in enumerate(trip.en_route) if f.speed is not None and f.speed > MOVING_MPH),
        None,
    )
    if b_index is None:
        if not fallback_speed_mph or fallback_speed_mph <= 0:
            raise DegenerateTrip("no moving fix en route and no fallback speed")
        return TripEstimate(straight / (fallback_speed_mph / MPS_TO_MPH), straight, straight, low_confidence=True)
    b = trip.en_route[b_index]
    path = path_length((*trip.en_route[b_index:], c))
    elapsed = c.timestamp - b.timestamp
    head = haversine_distance(a, b)
    if head == 0:
        return TripEstimate(float(elapsed), path, straight)
    if path == 0:
        raise DegenerateTrip("zero speed after B with non-zero distance from A")
    return TripEstimate(head / (path / elapsed) + elapsed, head + path, straight)


def global_speed_mph(trips: Sequence[Trip]) -> Optional[float]:
    """Overall effective speed: total straight-line distance over total estimated time."""
    dist = time = 0.0
    for trip in trips:
        try:
            est = estimate_trip_time(trip)
        except DegenerateTrip:
            continue
        dist += est.straight_m
        time += est.seconds
    if time <= 0 or dist <= 0:
        return None
    return dist / time * MPS_TO_MPH


def build_edges(trips: Sequence[Trip], fallback_speed_mph: float | None = None) -> list[TravelEdge]:
    """Average the accepted trip estimates per ordered location pair.

    Low-confidence samples only count for pairs with no regular sample. The
    edge speed is the path-length-weighted mean of the trips' effective speeds.
    """
    if fallback_speed_mph is None:
        fallback_speed_mph = global_speed_mph(trips)
    samples: dict[tuple[int, int], list[TripEstimate]] = defaultdict(list)
    for trip in trips:
        try:
            samples[(trip.from_loc, trip.to_loc)].append(estimate_trip_time(trip, fallback_speed_mph))
        except DegenerateTrip:
            continue
    edges = []
    for (src, dst), ests in sorted(samples.items()):
        good = [e for e in ests if not e.low_confidence] or ests
        mean_seconds = sum(e.seconds for e in good) / len(good)
        weight = sum(e.path_m for e in good)
        speed = sum(e.path_m * e.speed_mph for e in good) / weight if weight > 0 else 0.0
        edges.append(TravelEdge(src, dst, mean_seconds, len(good), speed))
    return edges


def _edge_map(edges: Sequence[TravelEdge]) -> dict[tuple[int, int], TravelEdge]:
    return {(e.from_id, e.to_id): e for e in edges}


def best_intermediate(
    x: HasLatLon,
    dest: int,
    edges: Sequence[TravelEdge],
    locations: Sequence[Location],
    detour: float = DETOUR_FACTOR,
) -> Optional[int]:
    """Known location k on the fastest detour-feasible path x -> k -> dest."""
    by_id = {loc.id: loc for loc in locations}
    target = by_id[dest].center
    direct = haversine_distance(x, target)
    best = None
    for e in edges:
        if e.to_id != dest or e.from_id == dest or e.mean_speed_mph <= 0 or e.from_id not in by_id:
            continue
        k = by_id[e.from_id].center
        if haversine_distance(x, k) + haversine_distance(k, target) <= detour * direct:
            key = (-e.mean_speed_mph, e.from_id)
            if best is None or key < best:
                best = key
    return None if best is None else best[1]


def travel_time_from(
    x: HasLatLon,
    dest: int,
    edges: Sequence[TravelEdge],
    locations: Sequence[Location],
    detour: float = DETOUR_FACTOR,
) -> float:
    """Seconds needed to get from an arbitrary position to location ``dest``."""
    by_id = {loc.id: loc for loc in locations}
    if dest not in by_id:
        raise KeyError(f"unknown location {dest}")
    if not edges:
        raise UntrainedModelError("untrained travel model")
    if haversine_distance(x, by_id[dest].center) <= by_id[dest].radius:
        return 0.0
    here = assign_location(x, locations)
    table = _edge_map(edges)
    if here is not None and (here, dest) in table:
        return table[(here, dest)].mean_seconds
    k = best_intermediate(x, dest, edges, locations, detour)
    if k is not None:
        speed = table[(k, dest)].mean_speed_mph
    else:
        speeds = [e.mean_speed_mph for e in edges if e.mean_speed_mph > 0]
        if not speeds:
            raise UntrainedModelError("no edge carries a usable speed")
        speed = sum(speeds) / len(speeds)
    return haversine_distance(x, by_id[dest].center) / (speed / MPS_TO_MPH)


# -- serialization ---------------------------------------------------------


def edges_to_csv(edges: Sequence[TravelEdge]) -> str:
    out = io.StringIO()
    out.write(EDGES_HEADER + "\n")
    for e in sorted(edges, key=lambda e: (e.from_id, e.to_id)):
        out.write(f"{e.from_id},{e.to_id},{e.mean_seconds:.3f},{e.n_samples},{e.mean_speed_mph:.4f}\n")
    return out.getvalue()


def edges_from_csv(text: str) -> list[TravelEdge]:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0].strip() != EDGES_HEADER:
        raise ValueError(f"expected header {EDGES_HEADER!r}")
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 5:
            raise ValueError(f"malformed edge row, line {lineno}")
        edges.append(TravelEdge(int(parts[0]), int(parts[1]), float(parts[2]), int(parts[3]), float(parts[4])))
    return edges
