"""Expectation-density projection of horizon scans and multi-scan fusion.

Each scan is projected through the SRP onto every grid cell using only the
bearing from the scan position to the cell; there is no range term, so a
transmitter shows up where beams from several vantage points intersect.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .antenna import SRPModel, srp_wrapped
from .geometry import GridSpec
from .scanops import HorizonScan

DEFAULT_ALPHA = 0.95


@dataclass(frozen=True)
class Heatmap:
    grid: GridSpec
    values: np.ndarray  # (height, width), indexed [j, i]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values of shape {v.shape} do not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("heatmap values must be finite and non-negative")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FusedMap(Heatmap):
    n_scans: int = 1
    threshold_applied: float | None = None

    @property
    def peak_cell(self) -> tuple[int, int]:
        j, i = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return int(i), int(j)


def _wrap(d):
    # [-180, 180); the SRP is even so the -180/180 seam is immaterial
    return np.mod(d + 180.0, 360.0) - 180.0


def _bearings(grid: GridSpec, origin) -> tuple[np.ndarray, np.ndarray]:
    east, north = grid.centers()
    de = east - origin[0]
    dn = north - origin[1]
    bearing = np.mod(np.degrees(np.arctan2(de, dn)), 360.0)
    return bearing, (de == 0.0) & (dn == 0.0)


def expectation_density(scan: HorizonScan, srp: SRPModel, grid: GridSpec, weighted: bool = True) -> Heatmap:
    """Project one horizon scan onto the grid.

    Weighted (default): each cell accumulates ``rel_power_j * SRP(heading_j -
    bearing)`` over all heading steps. Unweighted: a single SRP projection
    along the scan's strongest heading, ignoring the power values.
    """
    bearing, coincident = _bearings(grid, scan.pose.position)
    hm = np.zeros(grid.shape)
    if weighted:
        for h, p in zip(scan.headings, scan.rel_power):
            if p != 0.0:
                hm += p * srp_wrapped(srp, _wrap(h - bearing))
    elif np.any(scan.rel_power > 0):
        hm = srp_wrapped(srp, _wrap(scan.peak_heading - bearing))
    hm[coincident] = 0.0
    return Heatmap(grid, hm)


def fuse(maps: list[Heatmap]) -> FusedMap:
    """Cell-wise mean of per-scan densities.

    Values are sorted per cell before summation, and the mean is taken as
    ``min + sum(x - min) / N``; the result is independent of input order and
    exact for identical inputs.
    """
    if not maps:
        raise ValueError("nothing to fuse")
    grid = maps[0].grid
    for m in maps[1:]:
        if m.grid != grid:
            raise ValueError("cannot fuse heatmaps on different grids")
    stack = np.sort(np.stack([m.values for m in maps]), axis=0)
    lo = stack[0]
    acc = np.zeros_like(lo)
    for layer in stack[1:]:
        acc += layer - lo
    return FusedMap(grid, lo + acc / len(maps), n_scans=len(maps))


def fuse_scans(scans: list[HorizonScan], srp: SRPModel, grid: GridSpec, weighted: bool = True) -> FusedMap:
    return fuse([expectation_density(s, srp, grid, weighted) for s in scans])


def threshold(fmap: FusedMap, alpha: float = DEFAULT_ALPHA) -> FusedMap:
    """Zero every cell below ``alpha * max``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    peak = float(fmap.values.max())
    if peak <= 0:
        raise ValueError("cannot threshold an all-zero map")
    v = np.where(fmap.values < alpha * peak, 0.0, fmap.values)
    return FusedMap(fmap.grid, v, fmap.n_scans, alpha)


def pgm_bytes(hmap: Heatmap) -> bytes:
    """16-bit binary PGM, scaled to the map maximum, north row first."""
    v = hmap.values
    peak = float(v.max())
    scaled = np.zeros(v.shape) if peak <= 0 else np.rint(v / peak * 65535.0)
    img = np.flipud(scaled).astype(">u2")
    header = f"P5\n{hmap.grid.width} {hmap.grid.height}\n65535\n".encode("ascii")
    return header + img.tobytes()


def heatmap_to_dict(hmap: Heatmap) -> dict:
    d = {"grid": hmap.grid.to_dict(), "row_order": "south_to_north", "values": hmap.values.tolist()}
    if isinstance(hmap, FusedMap):
        d["n_scans"] = hmap.n_scans
        d["threshold_applied"] = hmap.threshold_applied
    return d


def heatmap_from_dict(d: dict) -> FusedMap:
    grid = GridSpec.from_dict(d["grid"])
    return FusedMap(grid, np.array(d["values"], dtype=float), int(d.get("n_scans", 1)),
                    d.get("threshold_applied"))


def write_heatmap(out_dir, hmap: Heatmap, stem: str = "heatmap") -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    pgm = out_dir / f"{stem}.pgm"
    js = out_dir / f"{stem}.json"
    pgm.write_bytes(pgm_bytes(hmap))
    js.write_text(json.dumps(heatmap_to_dict(hmap), sort_keys=True) + "\n")
    return pgm, js
