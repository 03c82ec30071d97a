"""Grouping place points into significant locations.

Clustering is a radius-constrained k-means: seed a cluster on a random
unclaimed place, pull the center to the mean of everything inside the radius
until it settles, and repeat until every place is claimed. Clusters that own
no point exclusively are then dropped. The radius itself is picked from the
knee of the cluster-count curve over a sweep of radii.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .geo import GeoPoint, HasLatLon, from_local, haversine_distance, haversine_many, to_local

MAX_ITERATIONS = 100
CONVERGENCE_M = 1.0
DEFAULT_RADII = tuple(float(r) for r in range(50, 1001, 25))
DEFAULT_WINDOW = 5
DEFAULT_K_KNEE = 3.0
TAIL_FRACTION = 0.25

LOCATIONS_FORMAT = "# lateminder-locations v1"
LOCATIONS_HEADER = "id,center_lat,center_lon,radius_m,member_count"


@dataclass(frozen=True)
class Location:
    id: int
    center: GeoPoint
    radius: float
    members: tuple[int, ...] = ()

    @property
    def lat(self) -> float:
        return self.center.lat

    @property
    def lon(self) -> float:
        return self.center.lon


@dataclass(frozen=True)
class RadiusSweep:
    radii: tuple[float, ...]
    raw_counts: tuple[int, ...]
    smoothed_counts: tuple[float, ...]
    chosen_radius: float
    seed: int
    knee_found: bool = True

    def seed_for(self, radius: float) -> int:
        return mix_seed(self.seed, self.radii.index(radius))


class KneeChoice(NamedTuple):
    radius: float
    found: bool


def mix_seed(seed: int, index: int) -> int:
    """Independent per-radius seed, stable across runs and platforms."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _coords(places: Sequence[HasLatLon]) -> tuple[np.ndarray, np.ndarray]:
    lats = np.fromiter((p.lat for p in places), dtype=float, count=len(places))
    lons = np.fromiter((p.lon for p in places), dtype=float, count=len(places))
    return lats, lons


def _refine(lats, lons, lat0, lon0, radius):
    """Mean-shift the center until it moves less than a meter."""
    for _ in range(MAX_ITERATIONS):
        inside = haversine_many(lat0, lon0, lats, lons) <= radius
        if not inside.any():
            break
        x, y = to_local(lat0, lon0, lats[inside], lons[inside])
        new = from_local(lat0, lon0, float(x.mean()), float(y.mean()))
        moved = haversine_distance(GeoPoint(lat0, lon0), new)
        lat0, lon0 = new.lat, new.lon
        if moved < CONVERGENCE_M:
            break
    inside = haversine_many(lat0, lon0, lats, lons) <= radius
    return lat0, lon0, inside


def cluster_at_radius(places: Sequence[HasLatLon], radius: float, seed: int = 0) -> list[Location]:
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    n = len(places)
    if n == 0:
        return []
    lats, lons = _coords(places)
    rng = np.random.default_rng(seed)
    claimed = np.zeros(n, dtype=bool)
    centers: list[tuple[float, float]] = []
    membership: list[np.ndarray] = []
    while not claimed.all():
        start = int(rng.choice(np.flatnonzero(~claimed)))
        lat0, lon0, inside = _refine(lats, lons, lats[start], lons[start], radius)
        # the seed is claimed even if the center drifted away from it
        claimed[start] = True
        claimed |= inside
        if inside.any():
            centers.append((lat0, lon0))
            membership.append(inside)

    alive = list(range(len(centers)))
    while True:
        cover = np.sum([membership[i] for i in alive], axis=0)
        redundant = [i for i in alive if not np.any(membership[i] & (cover == 1))]
        if not redundant:
            break
        # drop one at a time: removing a cluster can make another's points unique
        victim = min(redundant, key=lambda i: (int(membership[i].sum()), -i))
        alive.remove(victim)

    order = sorted(alive, key=lambda i: (-int(membership[i].sum()), i))
    return [
        Location(
            id=new_id,
            center=GeoPoint(*centers[i]),
            radius=float(radius),
            members=tuple(int(j) for j in np.flatnonzero(membership[i])),
        )
        for new_id, i in enumerate(order)
    ]


def owners(places: Sequence[HasLatLon], locations: Sequence[Location]) -> list[Optional[int]]:
    """Location id owning each place: nearest containing center, lower id on ties."""
    return [assign_location(p, locations) for p in places]


def smooth_counts(counts: Sequence[float], window: int = DEFAULT_WINDOW) -> list[float]:
    """Centered moving average; near the ends the window is clipped to the data."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    half = window // 2
    n = len(counts)
    values = [float(c) for c in counts]
    out = []
    for i in range(n):
        lo, hi = max(0, i - half), min(n, i + half + 1)
        out.append(math.fsum(values[lo:hi]) / (hi - lo))
    return out


def select_knee(
    radii: Sequence[float],
    smoothed: Sequence[float],
    k_knee: float = DEFAULT_K_KNEE,
    tail_fraction: float = TAIL_FRACTION,
) -> KneeChoice:
    """Radius where the smoothed count curve stops falling, scanning right to left.

    The flat tail (rightmost quarter of the slopes) sets a baseline slope;
    the knee is the rightmost radius whose incoming slope exceeds
    ``k_knee`` times that baseline.
    """
    if len(radii) < 4 or len(radii) != len(smoothed):
        raise ValueError("need at least 4 radii with matching counts")
    r = np.asarray(radii, dtype=float)
    s = np.asarray(smoothed, dtype=float)
    slopes = np.abs(np.diff(s) / np.diff(r))
    n_tail = max(1, math.ceil(tail_fraction * len(slopes)))
    baseline = float(slopes[-n_tail:].mean())
    if baseline == 0:
        baseline = float(slopes.mean()) / 10
    threshold = k_knee * baseline
    # slopes[j] is the slope arriving at radii[j + 1]
    for j in range(len(slopes) - 1, -1, -1):
        if slopes[j] > threshold:
            return KneeChoice(float(r[j + 1]), True)
    return KneeChoice(float(r[(len(r) - 1) // 2]), False)


def sweep_radii(
    places: Sequence[HasLatLon],
    radii: Sequence[float] = DEFAULT_RADII,
    seed: int = 0,
    window: int = DEFAULT_WINDOW,
    k_knee: float = DEFAULT_K_KNEE,
    workers: int | None = None,
) -> RadiusSweep:
    if not places:
        raise ValueError("nothing to sweep")
    radii = tuple(float(r) for r in radii)
    if not radii or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be non-empty and strictly ascending")

    def count(i: int) -> int:
        return len(cluster_at_radius(places, radii[i], mix_seed(seed, i)))

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(count, range(len(radii))))
    else:
        raw = [count(i) for i in range(len(radii))]
    smoothed = smooth_counts(raw, window)
    knee = select_knee(radii, smoothed, k_knee)
    return RadiusSweep(radii, tuple(raw), tuple(smoothed), knee.radius, seed, knee.found)


def assign_location(p: HasLatLon, locations: Sequence[Location]) -> Optional[int]:
    best = None
    for loc in locations:
        d = haversine_distance(p, loc.center)
        if d <= loc.radius and (best is None or (d, loc.id) < best):
            best = (d, loc.id)
    return None if best is None else best[1]


# -- serialization ---------------------------------------------------------


def locations_to_csv(locations: Sequence[Location]) -> str:
    out = io.StringIO()
    out.write(LOCATIONS_FORMAT + "\n" + LOCATIONS_HEADER + "\n")
    for loc in sorted(locations, key=lambda l: l.id):
        out.write(f"{loc.id},{loc.lat:.6f},{loc.lon:.6f},{loc.radius:.1f},{len(loc.members)}\n")
    return out.getvalue()


def locations_from_csv(text: str) -> list[Location]:
    """Reload locations. Member indices are not stored, only their count."""
    rows = [line for line in text.splitlines() if line.strip() and not line.startswith("#")]
    if not rows or rows[0].strip() != LOCATIONS_HEADER:
        raise ValueError(f"expected header {LOCATIONS_HEADER!r}")
    locations = []
    for lineno, line in enumerate(rows[1:], start=2):
        parts = line.split(",")
        if len(parts) != 5:
            raise ValueError(f"malformed location row, line {lineno}")
        locations.append(
            Location(int(parts[0]), GeoPoint(float(parts[1]), float(parts[2])), float(parts[3]))
        )
    return locations


def sweep_to_csv(sweep: RadiusSweep) -> str:
    out = io.StringIO()
    out.write("radius_m,raw_count,smoothed_count,chosen\n")
    for r, raw, sm in zip(sweep.radii, sweep.raw_counts, sweep.smoothed_counts):
        out.write(f"{r:.1f},{raw},{sm:.4f},{int(r == sweep.chosen_radius)}\n")
    return out.getvalue()
