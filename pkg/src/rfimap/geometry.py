"""Local planar frame, compass bearings and grid indexing.

Bearings are compass angles in degrees: 0 is local north and angles grow
clockwise, so east is 90. Every function here is pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

EARTH_RADIUS_M = 6371008.8
MAX_GRID_CELLS = 4_000_000


class LocalPoint(NamedTuple):
    east: float
    north: float


def normalize_bearing(angle):
    """Wrap degrees into [0, 360). Works on scalars and arrays."""
    wrapped = np.mod(angle, 360.0)
    # np.mod can return 360.0 for tiny negative inputs
    wrapped = np.where(wrapped >= 360.0, 0.0, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def bearing_to(frm, to) -> float:
    """Compass bearing from `frm` to `to` in [0, 360)."""
    de = float(to[0]) - float(frm[0])
    dn = float(to[1]) - float(frm[1])
    if de == 0.0 and dn == 0.0:
        raise ValueError("bearing undefined between coincident points")
    return normalize_bearing(math.degrees(math.atan2(de, dn)))


def bearing_diff(a, b):
    """Signed difference ``a - b`` wrapped to (-180, 180].

    Works elementwise on arrays.
    """
    d = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 360.0)
    d = np.where(d > 180.0, d - 360.0, d)
    if np.ndim(d) == 0:
        return float(d)
    return d


def circular_mean(angles_deg, weights=None) -> tuple[float, float]:
    """Return (mean bearing, resultant length in [0, 1])."""
    a = np.radians(np.asarray(angles_deg, dtype=float))
    if a.size == 0:
        raise ValueError("circular mean of an empty set")
    w = np.ones_like(a) if weights is None else np.asarray(weights, dtype=float)
    s = float(np.sum(w * np.sin(a)))
    c = float(np.sum(w * np.cos(a)))
    r = math.hypot(s, c) / float(np.sum(w))
    if r < 1e-12:
        return 0.0, 0.0
    return normalize_bearing(math.degrees(math.atan2(s, c))), min(r, 1.0)


@dataclass(frozen=True)
class GridSpec:
    """Regular grid on the local plane.

    `origin` is the south-west corner of cell (0, 0). Index ``i`` runs east
    along `width`, ``j`` runs north along `height`; arrays laid over the grid
    have shape ``(height, width)`` and are indexed ``[j, i]``.
    """

    origin: LocalPoint
    resolution: float
    width: int
    height: int

    def __post_init__(self):
        object.__setattr__(self, "origin", LocalPoint(float(self.origin[0]), float(self.origin[1])))
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise ValueError(f"grid resolution must be positive, got {self.resolution}")
        if int(self.width) < 1 or int(self.height) < 1:
            raise ValueError("grid width and height must be at least 1")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        if self.width * self.height > MAX_GRID_CELLS:
            raise ValueError(
                f"grid of {self.width}x{self.height} exceeds {MAX_GRID_CELLS} cells"
            )

    @classmethod
    def covering(cls, east_min, east_max, north_min, north_max, resolution=5.0):
        """Smallest grid at `resolution` containing the given box."""
        width = max(1, int(math.ceil((east_max - east_min) / resolution)))
        height = max(1, int(math.ceil((north_max - north_min) / resolution)))
        return cls(LocalPoint(east_min, north_min), resolution, width, height)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(east_min, east_max, north_min, north_max)"""
        e0, n0 = self.origin
        return (e0, e0 + self.width * self.resolution, n0, n0 + self.height * self.resolution)

    def cell_center(self, i: int, j: int) -> LocalPoint:
        if not (0 <= i < self.width and 0 <= j < self.height):
            raise IndexError(f"cell ({i}, {j}) outside {self.width}x{self.height} grid")
        return LocalPoint(
            self.origin.east + (i + 0.5) * self.resolution,
            self.origin.north + (j + 0.5) * self.resolution,
        )

    def point_to_cell(self, p) -> tuple[int, int]:
        i = int(math.floor((p[0] - self.origin.east) / self.resolution))
        j = int(math.floor((p[1] - self.origin.north) / self.resolution))
        if not (0 <= i < self.width and 0 <= j < self.height):
            raise IndexError(f"point {tuple(p)} outside grid")
        return i, j

    def contains(self, p) -> bool:
        e0, e1, n0, n1 = self.extent
        return e0 <= p[0] < e1 and n0 <= p[1] < n1

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """East and north coordinates of all cell centres, each ``(height, width)``."""
        east = self.origin.east + (np.arange(self.width) + 0.5) * self.resolution
        north = self.origin.north + (np.arange(self.height) + 0.5) * self.resolution
        return np.meshgrid(east, north)

    def to_dict(self) -> dict:
        return {
            "origin": [self.origin.east, self.origin.north],
            "resolution": self.resolution,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(LocalPoint(*d["origin"]), float(d["resolution"]), int(d["width"]), int(d["height"]))


def geodetic_to_local(lat, lon, origin_lat, origin_lon) -> LocalPoint:
    # equirectangular; fine for a few km around the origin
    east = math.radians(lon - origin_lon) * EARTH_RADIUS_M * math.cos(math.radians(origin_lat))
    north = math.radians(lat - origin_lat) * EARTH_RADIUS_M
    return LocalPoint(east, north)


def local_to_geodetic(p, origin_lat, origin_lon) -> tuple[float, float]:
    lat = origin_lat + math.degrees(p[1] / EARTH_RADIUS_M)
    lon = origin_lon + math.degrees(p[0] / (EARTH_RADIUS_M * math.cos(math.radians(origin_lat))))
    return lat, lon
