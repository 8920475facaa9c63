"""Periodogram PSD, channel band power, peak markers and harmonic attribution."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.signal import find_peaks

from .geometry import LocalPoint

HARMONIC_ORDERS = (1, 2, 3)
DEFAULT_PROMINENCE_DB = 10.0


@dataclass(frozen=True)
class IQBuffer:
    samples: np.ndarray
    sample_rate_hz: float
    center_freq_mhz: float

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.complex128)
        n = x.size
        if x.ndim != 1 or n < 16 or n & (n - 1):
            raise ValueError(f"IQ length must be a power of two >= 16, got {n}")
        if not np.all(np.isfinite(x)):
            raise ValueError("IQ buffer contains non-finite samples")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample rate must be positive")
        object.__setattr__(self, "samples", x)

    @property
    def n(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class PSDFrame:
    """One periodogram in natural DFT bin order ``k = 0..N-1``."""

    power: np.ndarray
    freqs_mhz: np.ndarray
    heading: float | None = None
    position: LocalPoint | None = None

    @property
    def span_mhz(self) -> tuple[float, float]:
        return float(self.freqs_mhz.min()), float(self.freqs_mhz.max())

    def shifted(self) -> tuple[np.ndarray, np.ndarray]:
        """(freqs, power) sorted by frequency, for plotting and peak search."""
        order = np.argsort(self.freqs_mhz, kind="stable")
        return self.freqs_mhz[order], self.power[order]

    def to_dict(self) -> dict:
        f, p = self.shifted()
        out = {"freqs_mhz": f.tolist(), "power": p.tolist()}
        if self.heading is not None:
            out["heading_deg"] = self.heading
        if self.position is not None:
            out["position"] = list(self.position)
        return out


@dataclass(frozen=True)
class ChannelMask:
    name: str
    center_mhz: float
    bandwidth_mhz: float

    def __post_init__(self):
        if not self.bandwidth_mhz > 0:
            raise ValueError(f"channel {self.name}: bandwidth must be positive")

    @property
    def low(self) -> float:
        return self.center_mhz - self.bandwidth_mhz / 2.0

    @property
    def high(self) -> float:
        return self.center_mhz + self.bandwidth_mhz / 2.0


class Allocation(NamedTuple):
    name: str
    low_mhz: float
    high_mhz: float

    def contains(self, f: float) -> bool:
        return self.low_mhz <= f <= self.high_mhz


class Attribution(NamedTuple):
    fundamental_mhz: float
    order: int
    allocation: str | None


@dataclass(frozen=True)
class PeakReport:
    freq_mhz: float
    power: float
    prominence: float
    bin: int
    attribution: tuple[Attribution, ...] = ()

    def to_dict(self) -> dict:
        return {
            "freq_mhz": self.freq_mhz,
            "power": self.power,
            "prominence": self.prominence,
            "bin": self.bin,
            "attribution": [a._asdict() for a in self.attribution],
        }


@dataclass(frozen=True)
class BandConfig:
    front_end_mhz: tuple[float, float]
    channels: dict[str, ChannelMask] = field(default_factory=dict)
    allocations: tuple[Allocation, ...] = ()


def load_band_config(path=None) -> BandConfig:
    """Channels and frequency allocations; packaged defaults when `path` is None.

    Allocations are regulation specific, so deployments are expected to
    ship their own table.
    """
    if path is None:
        text = resources.files("rfimap").joinpath("data/bands.json").read_text()
    else:
        text = Path(path).read_text()
    d = json.loads(text)
    channels = {c["name"]: ChannelMask(c["name"], float(c["center_mhz"]), float(c["bandwidth_mhz"]))
                for c in d.get("channels", [])}
    allocs = tuple(Allocation(a["name"], float(a["low_mhz"]), float(a["high_mhz"]))
                   for a in d.get("allocations", []))
    fe = d.get("front_end_mhz", [0.0, math.inf])
    return BandConfig((float(fe[0]), float(fe[1])), channels, allocs)


def psd(iq: IQBuffer, heading=None, position=None) -> PSDFrame:
    """Raw periodogram ``P(f_k) = |DFT(x)[k]|**2 / N``, no window, no averaging."""
    n = iq.n
    spec = np.fft.fft(iq.samples)
    power = (spec.real ** 2 + spec.imag ** 2) / n
    freqs = iq.center_freq_mhz + np.fft.fftfreq(n, d=1.0 / iq.sample_rate_hz) / 1e6
    return PSDFrame(power, freqs, heading, position)


def psd_averaged(buffers: list[IQBuffer], heading=None, position=None) -> PSDFrame:
    """Bin-wise mean of the periodograms of several equal-length captures."""
    if not buffers:
        raise ValueError("no buffers to average")
    frames = [psd(b) for b in buffers]
    if len({f.power.size for f in frames}) != 1:
        raise ValueError("buffers differ in length")
    power = np.mean([f.power for f in frames], axis=0)
    return PSDFrame(power, frames[0].freqs_mhz, heading, position)


def band_power(frame: PSDFrame, mask: ChannelMask) -> float:
    lo, hi = frame.span_mhz
    if mask.high < lo or mask.low > hi:
        raise ValueError(f"channel {mask.name} does not overlap the captured span")
    inside = (frame.freqs_mhz >= mask.low) & (frame.freqs_mhz <= mask.high)
    if not np.any(inside):
        # channel narrower than one bin
        k = int(np.argmin(np.abs(frame.freqs_mhz - mask.center_mhz)))
        return float(frame.power[k])
    return float(np.sum(frame.power[inside]))


def attribute_harmonics(peak_mhz: float, allocations=None) -> list[Attribution]:
    """Allocations whose band holds ``peak_mhz / d`` for harmonic order d."""
    if allocations is None:
        allocations = load_band_config().allocations
    out = []
    for order in HARMONIC_ORDERS:
        f = peak_mhz / order
        for a in allocations:
            if a.contains(f):
                out.append(Attribution(f, order, a.name))
    return out


def detect_peaks(frame: PSDFrame, min_prominence: float | None = None, allocations=None) -> list[PeakReport]:
    """Local spectral maxima standing out by at least `min_prominence`.

    The default threshold is 10 dB above the median bin power.
    """
    freqs, power = frame.shifted()
    order = np.argsort(frame.freqs_mhz, kind="stable")
    if min_prominence is None:
        min_prominence = float(np.median(power)) * 10.0 ** (DEFAULT_PROMINENCE_DB / 10.0)
    # ignore rounding-level ripple around exact tones
    floor = 1e-9 * float(power.max()) if power.size else 0.0
    threshold = max(min_prominence, floor)
    if threshold <= 0:
        return []
    idx, props = find_peaks(power, prominence=threshold)
    peaks = []
    for k, prom in zip(idx, props["prominences"]):
        f = float(freqs[k])
        peaks.append(PeakReport(f, float(power[k]), float(prom), int(order[k]),
                                tuple(attribute_harmonics(f, allocations))))
    peaks.sort(key=lambda p: (-p.power, p.freq_mhz))
    return peaks


def write_iq(path, iq: IQBuffer) -> Path:
    """Write interleaved float32 little-endian I/Q plus a JSON sidecar."""
    path = Path(path)
    inter = np.empty(2 * iq.n, dtype="<f4")
    inter[0::2] = iq.samples.real
    inter[1::2] = iq.samples.imag
    path.write_bytes(inter.tobytes())
    sidecar = {"sample_rate_hz": iq.sample_rate_hz, "center_freq_mhz": iq.center_freq_mhz, "n": iq.n}
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=1, sort_keys=True) + "\n")
    return path


def read_iq(path) -> IQBuffer:
    path = Path(path)
    if path.suffix == ".json":
        meta_path, bin_path = path, path.with_suffix(".bin")
    else:
        meta_path, bin_path = path.with_suffix(".json"), path
    meta = json.loads(meta_path.read_text())
    n = int(meta["n"])
    raw = bin_path.read_bytes()
    if len(raw) != 8 * n:
        raise ValueError(f"{bin_path}: {len(raw)} bytes, sidecar declares n={n} ({8 * n} bytes)")
    inter = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return IQBuffer(inter[0::2] + 1j * inter[1::2], float(meta["sample_rate_hz"]),
                    float(meta["center_freq_mhz"]))
