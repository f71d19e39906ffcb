"""WGS84 geodetic <-> local North-East-Down conversion.

The chain is exact (geodetic -> ECEF -> NED rotation about the frame
origin). ECEF -> geodetic starts from Bowring's closed form and refines
latitude by fixed-point iteration until it stops changing; near the
surface this converges in one or two steps to below 1e-14 rad.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_B = WGS84_A * (1.0 - WGS84_F)
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)
WGS84_EP2 = WGS84_E2 / (1.0 - WGS84_E2)


def _normalize_lon(lon):
    lon = np.asarray(lon, dtype=float)
    out = np.mod(lon + 180.0, 360.0) - 180.0
    # map -180 to +180 so the range is (-180, 180]
    return np.where(out == -180.0, 180.0, out)


@dataclass(frozen=True)
class GeodeticPoint:
    latitude: float
    longitude: float
    height: float

    def __post_init__(self):
        vals = (self.latitude, self.longitude, self.height)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("geodetic coordinates must be finite")
        if abs(self.latitude) > 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")
        object.__setattr__(self, "latitude", float(self.latitude))
        object.__setattr__(self, "longitude", float(_normalize_lon(self.longitude)))
        object.__setattr__(self, "height", float(self.height))

    def as_array(self) -> np.ndarray:
        return np.array([self.latitude, self.longitude, self.height])


def geodetic_to_ecef(lat_deg, lon_deg, h) -> np.ndarray:
    lat = np.radians(np.asarray(lat_deg, dtype=float))
    lon = np.radians(np.asarray(lon_deg, dtype=float))
    h = np.asarray(h, dtype=float)
    sl = np.sin(lat)
    N = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sl * sl)
    x = (N + h) * np.cos(lat) * np.cos(lon)
    y = (N + h) * np.cos(lat) * np.sin(lon)
    z = (N * (1.0 - WGS84_E2) + h) * sl
    return np.stack([x, y, z], axis=-1)


def ecef_to_geodetic(xyz) -> np.ndarray:
    """``(..., 3)`` ECEF meters -> ``(..., 3)`` of (lat deg, lon deg, h m)."""
    xyz = np.asarray(xyz, dtype=float)
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    p = np.hypot(x, y)
    lon = np.arctan2(y, x)

    # Bowring initial latitude
    theta = np.arctan2(z * WGS84_A, p * WGS84_B)
    st, ct = np.sin(theta), np.cos(theta)
    lat = np.arctan2(z + WGS84_EP2 * WGS84_B * st**3, p - WGS84_E2 * WGS84_A * ct**3)

    for _ in range(5):
        sl = np.sin(lat)
        N = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sl * sl)
        new = np.arctan2(z + WGS84_E2 * N * sl, p)
        done = np.all(np.abs(new - lat) < 1e-15)
        lat = new
        if done:
            break

    sl, cl = np.sin(lat), np.cos(lat)
    # well conditioned at every latitude, including the poles
    h = p * cl + z * sl - WGS84_A * np.sqrt(1.0 - WGS84_E2 * sl * sl)
    return np.stack([np.degrees(lat), _normalize_lon(np.degrees(lon)), h], axis=-1)


def _ecef_to_ned_rotation(lat_deg: float, lon_deg: float) -> np.ndarray:
    lat, lon = np.radians(lat_deg), np.radians(lon_deg)
    sphi, cphi = np.sin(lat), np.cos(lat)
    slam, clam = np.sin(lon), np.cos(lon)
    return np.array(
        [
            [-sphi * clam, -sphi * slam, cphi],
            [-slam, clam, 0.0],
            [-cphi * clam, -cphi * slam, -sphi],
        ]
    )


@dataclass(frozen=True, eq=False)
class LocalFrame:
    """NED frame anchored at a geodetic reference point."""

    origin: GeodeticPoint

    def __post_init__(self):
        o = self.origin
        object.__setattr__(self, "_origin_ecef", geodetic_to_ecef(o.latitude, o.longitude, o.height))
        object.__setattr__(self, "_R", _ecef_to_ned_rotation(o.latitude, o.longitude))

    def ned_to_geodetic(self, p_local) -> np.ndarray:
        """``(..., 3)`` NED -> ``(..., 3)`` (lat, lon, h)."""
        p = np.asarray(p_local, dtype=float)
        ecef = p @ self._R + self._origin_ecef
        return ecef_to_geodetic(ecef)

    def geodetic_to_ned(self, llh) -> np.ndarray:
        llh = np.asarray(llh, dtype=float)
        ecef = geodetic_to_ecef(llh[..., 0], llh[..., 1], llh[..., 2])
        return (ecef - self._origin_ecef) @ self._R.T

    def up_ned(self, llh) -> np.ndarray:
        """Outward ellipsoid normals at geodetic points, expressed in this frame."""
        llh = np.asarray(llh, dtype=float)
        lat, lon = np.radians(llh[..., 0]), np.radians(llh[..., 1])
        n = np.stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=-1)
        return n @ self._R.T


def local_to_global(frame: LocalFrame, p_local) -> GeodeticPoint:
    lat, lon, h = frame.ned_to_geodetic(np.asarray(p_local, dtype=float).reshape(3))
    return GeodeticPoint(lat, lon, h)


def global_to_local(frame: LocalFrame, p: GeodeticPoint) -> np.ndarray:
    return frame.geodetic_to_ned(p.as_array())
