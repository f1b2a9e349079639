"""Great-circle distances on a spherical Earth."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .model import Mission

# IUGG mean Earth radius.
EARTH_RADIUS_KM = 6371.0088


@dataclass(frozen=True)
class GeoPoint:
    lat_deg: float
    lon_deg: float

    def __post_init__(self):
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat_deg}")
        if not -180.0 <= self.lon_deg <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon_deg}")


def haversine_km(a: GeoPoint, b: GeoPoint, radius_km: float = EARTH_RADIUS_KM) -> float:
    """Haversine distance between two points given in decimal degrees."""
    phi_a = math.radians(a.lat_deg)
    phi_b = math.radians(b.lat_deg)
    d_phi = phi_b - phi_a
    d_psi = math.radians(b.lon_deg) - math.radians(a.lon_deg)
    # sin^2 is even, so swapping a and b gives the same bits.
    h = math.sin(d_phi / 2.0) ** 2 + math.cos(phi_a) * math.cos(phi_b) * math.sin(d_psi / 2.0) ** 2
    # round-off can push h a hair above 1 for antipodes
    h = min(1.0, h)
    return 2.0 * radius_km * math.asin(math.sqrt(h))


def mission_cost_km(base: GeoPoint, mission: "Mission", radius_km: float = EARTH_RADIUS_KM) -> float:
    """Base-to-pickup plus base-to-delivery; the pickup-to-delivery leg is not charged."""
    return haversine_km(base, mission.pickup, radius_km) + haversine_km(base, mission.delivery, radius_km)
