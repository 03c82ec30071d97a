"""Learn significant locations, travel times and a weekly schedule from GPS tracks,
then replay tracks against a calendar to raise lateness alerts."""

from .geo import Fix, GeoPoint, derived_speed, haversine_distance
from .ingest import PlacePoint, Track, emit_csv, extract_places, filter_moving, parse_csv, parse_nmea

__version__ = "0.1.0"

__all__ = [
    "Fix",
    "GeoPoint",
    "PlacePoint",
    "Track",
    "derived_speed",
    "emit_csv",
    "extract_places",
    "filter_moving",
    "haversine_distance",
    "parse_csv",
    "parse_nmea",
]
