"""Geodesic and 3D link-distance computation.

Spherical earth (mean radius 6371 km), haversine great-circle distance in
its two-argument arctangent form, and 3D slant distance from the horizontal
distance plus the altitude difference. Transmitter and gateway altitudes are
assumed to share a common vertical datum; no geoid correction is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

MEAN_EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class GeoPoint:
    """A latitude/longitude/altitude triple in degrees and meters.

    Longitude is normalized into (-180, 180]; latitude must lie in
    [-90, 90]; altitude may be negative but must be finite.
    """

    lat_deg: float
    lon_deg: float
    alt_m: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat_deg) and math.isfinite(self.lon_deg)
                and math.isfinite(self.alt_m)):
            raise ValueError(f"non-finite coordinate: {self!r}")
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude {self.lat_deg} outside [-90, 90]")
        lon = self.lon_deg - 360.0 * math.ceil((self.lon_deg - 180.0) / 360.0)
        object.__setattr__(self, "lon_deg", lon)


@dataclass(frozen=True)
class EarthModel:
    """Spherical earth of fixed mean radius."""

    radius_m: float = MEAN_EARTH_RADIUS_M

    def __post_init__(self) -> None:
        if not (math.isfinite(self.radius_m) and self.radius_m > 0):
            raise ValueError(f"earth radius must be positive, got {self.radius_m}")


EARTH = EarthModel()


_DEG2RAD = math.pi / 180.0


def horizontal_distance(p1: GeoPoint, p2: GeoPoint, earth: EarthModel = EARTH) -> float:
    """Great-circle distance in meters between two points, ignoring altitude.

    Haversine formula with the atan2 form, which stays accurate for both
    very small and near-antipodal separations.
    """
    sin, cos = math.sin, math.cos
    phi1 = p1.lat_deg * _DEG2RAD
    phi2 = p2.lat_deg * _DEG2RAD
    half_dphi = (p2.lat_deg - p1.lat_deg) * _DEG2RAD * 0.5
    half_dlam = (p2.lon_deg - p1.lon_deg) * _DEG2RAD * 0.5

    a = sin(half_dphi) ** 2 + cos(phi1) * cos(phi2) * sin(half_dlam) ** 2
    if a > 1.0:  # guard rounding just above 1
        a = 1.0
    return 2.0 * earth.radius_m * math.atan2(math.sqrt(a), math.sqrt(1.0 - a))


def link_distance_3d(p1: GeoPoint, p2: GeoPoint, earth: EarthModel = EARTH) -> float:
    """Total 3D transmitter-to-gateway distance in meters.

    Combines the great-circle horizontal distance with the altitude
    difference: sqrt(d_horiz^2 + (h2 - h1)^2).
    """
    d_horiz = horizontal_distance(p1, p2, earth)
    return math.hypot(d_horiz, p2.alt_m - p1.alt_m)
