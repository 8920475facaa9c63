"""Horizon scans: per-heading relative band power at one hover point."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .antenna import SRPModel, half_power_beamwidth
from .geometry import GridSpec, LocalPoint, circular_mean, normalize_bearing
from .spectrum import ChannelMask, PSDFrame, band_power

DIVISORS_360 = tuple(d for d in range(1, 361) if 360 % d == 0)


@dataclass(frozen=True)
class ScanPose:
    position: LocalPoint
    heading: float = 0.0

    def __post_init__(self):
        p = LocalPoint(float(self.position[0]), float(self.position[1]))
        if not (math.isfinite(p.east) and math.isfinite(p.north) and math.isfinite(self.heading)):
            raise ValueError("scan pose must be finite")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "heading", normalize_bearing(self.heading))


@dataclass(frozen=True)
class PoseTrace:
    timestamps: np.ndarray
    positions: np.ndarray  # (n, 2) east, north
    headings: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        h = np.asarray(self.headings, dtype=float)
        if not (t.size == pos.shape[0] == h.size):
            raise ValueError("trace fields differ in length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("trace timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "headings", normalize_bearing(h) if h.size else h)


@dataclass(frozen=True)
class HorizonScan:
    """One band's relative power over a full heading revolution.

    ``headings[k] == k * step_deg``; `rel_power` is divided by the scan
    maximum so the strongest heading reads 1 (all zeros when nothing was
    received).
    """

    pose: ScanPose
    band: str
    step_deg: float
    headings: np.ndarray
    rel_power: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.headings, dtype=float)
        p = np.asarray(self.rel_power, dtype=float)
        if h.shape != p.shape or h.ndim != 1 or h.size == 0:
            raise ValueError("headings and rel_power must be equal-length 1-D arrays")
        if np.any(np.isnan(p)):
            raise ValueError("NaN in scan powers")
        if np.any(p < 0):
            raise ValueError("negative relative power")
        object.__setattr__(self, "headings", h)
        object.__setattr__(self, "rel_power", p)

    @property
    def peak_heading(self) -> float:
        return float(self.headings[int(np.argmax(self.rel_power))])

    def to_dict(self) -> dict:
        return {
            "pose": {"x": self.pose.position.east, "y": self.pose.position.north, "psi": self.pose.heading},
            "band": self.band,
            "step_deg": self.step_deg,
            "steps": [{"heading_deg": float(h), "rel_power": float(p)}
                      for h, p in zip(self.headings, self.rel_power)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HorizonScan":
        pose = ScanPose(LocalPoint(float(d["pose"]["x"]), float(d["pose"]["y"])), float(d["pose"].get("psi", 0.0)))
        steps = d["steps"]
        return cls(pose, str(d["band"]), float(d["step_deg"]),
                   np.array([s["heading_deg"] for s in steps], dtype=float),
                   np.array([s["rel_power"] for s in steps], dtype=float))


def relative(powers) -> np.ndarray:
    p = np.asarray(powers, dtype=float)
    peak = float(p.max()) if p.size else 0.0
    if peak <= 0:
        return np.zeros_like(p)
    return p / peak


def step_count(step_deg: float) -> int:
    if not step_deg > 0:
        raise ValueError(f"heading step must be positive, got {step_deg}")
    n = int(round(360.0 / step_deg))
    if n < 1 or abs(n * step_deg - 360.0) > 1e-9:
        raise ValueError(f"step of {step_deg} deg does not divide 360")
    return n


def reference_pose(trace: PoseTrace) -> ScanPose:
    """Average position and circular-mean heading over a hover trace."""
    if trace.timestamps.size == 0:
        raise ValueError("empty pose trace")
    east, north = trace.positions.mean(axis=0)
    heading, _ = circular_mean(trace.headings)
    return ScanPose(LocalPoint(float(east), float(north)), heading)


def build_scan(frames: list[PSDFrame], mask: ChannelMask, step_deg: float,
               pose: ScanPose | None = None, gain: float = 1.0,
               average_duplicates: bool = False) -> HorizonScan:
    """Band power per heading bin, normalized to the scan maximum.

    Frames are matched to the nearest heading bin. With `average_duplicates`
    several dwell frames in one bin are averaged, otherwise a repeated bin
    is an error. `gain` is the band's gain-mask scale.
    """
    n = step_count(step_deg)
    acc = [[] for _ in range(n)]
    for fr in frames:
        if fr.heading is None:
            raise ValueError("PSD frame lacks a capture heading")
        k = int(round(normalize_bearing(fr.heading) / step_deg)) % n
        if acc[k] and not average_duplicates:
            raise ValueError(f"two frames fall in heading bin {k * step_deg:g} deg")
        acc[k].append(gain * band_power(fr, mask))
    missing = [k * step_deg for k in range(n) if not acc[k]]
    if missing:
        raise ValueError(f"incomplete revolution, no frames for headings {missing}")
    if pose is None:
        pts = [fr.position for fr in frames if fr.position is not None]
        if len(pts) != len(frames):
            raise ValueError("frames lack positions and no reference pose was given")
        t = np.arange(len(frames), dtype=float)
        pose = reference_pose(PoseTrace(t, np.array(pts), np.array([fr.heading for fr in frames])))
    powers = np.array([np.mean(a) for a in acc])
    return HorizonScan(pose, mask.name, float(step_deg), np.arange(n) * float(step_deg), relative(powers))


def build_scans(frames, masks, step_deg, pose=None, gains=None, average_duplicates=False) -> dict[str, HorizonScan]:
    gains = gains or {}
    return {m.name: build_scan(frames, m, step_deg, pose, gains.get(m.name, 1.0), average_duplicates)
            for m in masks}


def snap_step(width_deg: float) -> int:
    """Nearest divisor of 360; ties go to the finer step."""
    return min(DIVISORS_360, key=lambda d: (abs(d - width_deg), d))


def default_step(srp: SRPModel) -> int:
    """Heading increment matched to the antenna directivity (its HPBW)."""
    hpbw = half_power_beamwidth(srp)
    if not hpbw < 180.0:
        raise ValueError(f"SRP half-power beamwidth {hpbw:g} deg is not directional")
    return snap_step(hpbw)


def write_scan_log(path, scan: HorizonScan, grid: GridSpec | None = None) -> None:
    d = scan.to_dict()
    if grid is not None:
        d["grid"] = grid.to_dict()
    Path(path).write_text(json.dumps(d, indent=1, sort_keys=True) + "\n")


def read_scan_log(path) -> tuple[HorizonScan, GridSpec | None]:
    d = json.loads(Path(path).read_text())
    grid = GridSpec.from_dict(d["grid"]) if "grid" in d else None
    return HorizonScan.from_dict(d), grid
