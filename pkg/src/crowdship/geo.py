"""Great-circle geometry and distance-based work ordering.

Distances use the haversine formula on a spherical Earth (mean radius
6,371,000 m). Road routing backends can be swapped in through the
DistanceProvider protocol without touching callers.
"""

from __future__ import annotations

import math
from typing import Protocol, Sequence

from .domain import GeoPoint

EARTH_RADIUS_M = 6_371_000.0


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in meters.

    Symmetric, non-negative, and zero iff the coordinates are identical.
    """
    lat1 = math.radians(a.latitude)
    lat2 = math.radians(b.latitude)
    dlat = math.radians(b.latitude - a.latitude)
    dlon = math.radians(b.longitude - a.longitude)

    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    # Clamp against floating-point overshoot near antipodal points.
    return EARTH_RADIUS_M * 2.0 * math.asin(min(1.0, math.sqrt(h)))


class DistanceProvider(Protocol):
    """Pluggable source of source->destination route distances."""

    def distance_m(self, origin: GeoPoint, destination: GeoPoint) -> float: ...


class HaversineProvider:
    """Default provider: straight great-circle distance."""

    def distance_m(self, origin: GeoPoint, destination: GeoPoint) -> float:
        return haversine_m(origin, destination)


def order_by_distance(origin: GeoPoint, deliveries: Sequence, key=None) -> list:
    """Sort deliveries ascending by distance from `origin` to their source.

    `key` extracts (source GeoPoint, created_at, delivery_id) from an
    element; by default the element is expected to expose `.source.location`,
    `.created_at` and `.delivery_id`. Ties break on created_at, then id,
    so the ordering is a deterministic total order.
    """
    if key is None:
        key = lambda d: (d.source.location, d.created_at, d.delivery_id)

    def sort_key(d):
        location, created_at, delivery_id = key(d)
        return (haversine_m(origin, location), created_at, delivery_id)

    return sorted(deliveries, key=sort_key)
