"""Great-circle distances between neighborhood centroids and stores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import GeoPoint, Scenario

#: Mean Earth radius in km.  Fixed, not configurable, so outputs stay reproducible.
EARTH_RADIUS_KM = 6371.0


def haversine_array(lat1, lon1, lat2, lon2):
    """Vectorised haversine distance in km; inputs in degrees, broadcast together."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dlat = p2 - p1
    dlon = np.radians(lon2) - np.radians(lon1)
    h = np.sin(dlat / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in km.

    >>> round(haversine_km(GeoPoint(0, 0), GeoPoint(0, 1)), 3)
    111.195
    """
    return float(haversine_array(a.lat, a.lon, b.lat, b.lon))


@dataclass(frozen=True)
class DistanceMatrix:
    """Neighborhood-to-store distances in km, clamped below at ``floor_km``.

    Rows follow ``Scenario.neighborhoods`` order, columns ``Scenario.stores``.
    """

    values: np.ndarray
    floor_km: float
    neighborhood_ids: tuple[str, ...]
    store_ids: tuple[str, ...]

    @property
    def shape(self):
        return self.values.shape


def build_distance_matrix(s: Scenario) -> DistanceMatrix:
    nlat = np.array([n.centroid.lat for n in s.neighborhoods], dtype=float)
    nlon = np.array([n.centroid.lon for n in s.neighborhoods], dtype=float)
    slat = np.array([st.location.lat for st in s.stores], dtype=float)
    slon = np.array([st.location.lon for st in s.stores], dtype=float)
    raw = haversine_array(nlat[:, None], nlon[:, None], slat[None, :], slon[None, :])
    values = np.maximum(raw, s.distance_floor_km)
    values.flags.writeable = False
    return DistanceMatrix(
        values=values,
        floor_km=float(s.distance_floor_km),
        neighborhood_ids=tuple(s.neighborhood_ids),
        store_ids=tuple(s.store_ids),
    )
