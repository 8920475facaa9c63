"""Synthetic jammer scenarios for exercising the pipeline end to end.

Propagation is a plain power law with a configurable exponent; since the
fusion only uses per-heading relative power, the exact law matters little.
Every output is a pure function of the scenario and the seed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .antenna import RadiationPattern, SRPModel, srp_eval
from .geometry import GridSpec, LocalPoint, bearing_diff, bearing_to
from .scanops import HorizonScan, PoseTrace, ScanPose, reference_pose, relative, step_count
from .spectrum import ChannelMask, IQBuffer

HOVER_STDDEV_M = 0.142
DEFAULT_DENIAL_MARGIN_DB = 40.0


@dataclass(frozen=True)
class Jammer:
    position: LocalPoint
    eirp: float = 1.0
    band: str = "L1"
    duty_cycle: float = 1.0
    tx_pattern: SRPModel | None = None
    tx_heading: float = 0.0
    signal: str = "noise"  # tone | chirp | noise
    offset_mhz: float = 0.0
    bandwidth_mhz: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "position", LocalPoint(float(self.position[0]), float(self.position[1])))
        if not self.eirp > 0:
            raise ValueError("jammer EIRP must be positive")
        if not 0.0 < self.duty_cycle <= 1.0:
            raise ValueError("duty cycle must lie in (0, 1]")
        if not all(map(math.isfinite, self.position)):
            raise ValueError("jammer position must be finite")
        if self.signal not in ("tone", "chirp", "noise"):
            raise ValueError(f"unknown jammer signal {self.signal!r}")


@dataclass(frozen=True)
class JitterModel:
    stddev: float = HOVER_STDDEV_M
    wind_gain: float = 0.0  # extra along-wind stddev per m/s

    def __post_init__(self):
        if self.stddev < 0 or self.wind_gain < 0:
            raise ValueError("jitter parameters must be non-negative")


@dataclass(frozen=True)
class Wind:
    speed: float = 0.0
    direction: float = 0.0  # bearing the UAV is pushed towards


@dataclass(frozen=True)
class Scenario:
    jammers: tuple[Jammer, ...]
    poses: tuple[ScanPose, ...]
    grid: GridSpec
    srp: SRPModel = field(default_factory=lambda: SRPModel.gaussian(60.0))
    noise_floor: float = 1e-8
    path_loss_exponent: float = 2.0
    wind: Wind = Wind()
    jitter: JitterModel = JitterModel()
    band: str = "L1"
    step_deg: float = 10.0
    n_avg: int = 16
    denial_margin_db: float = DEFAULT_DENIAL_MARGIN_DB
    seed: int = 0

    def __post_init__(self):
        if not self.poses:
            raise ValueError("scenario needs at least one scan pose")
        if not 1.5 <= self.path_loss_exponent <= 4.0:
            raise ValueError("path loss exponent must lie in [1.5, 4]")
        if self.noise_floor < 0 or self.n_avg < 1:
            raise ValueError("noise floor must be >= 0 and n_avg >= 1")
        step_count(self.step_deg)
        for jam in self.jammers:
            r = denial_radius(jam, self.noise_floor, self.path_loss_exponent, self.denial_margin_db)
            for k, pose in enumerate(self.poses):
                d = math.dist(pose.position, jam.position)
                if d <= r:
                    raise ValueError(
                        f"pose {k} is {d:.1f} m from a jammer, inside its {r:.1f} m denial radius")

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        jammers = []
        for j in d.get("jammers", []):
            tx = j.get("tx_pattern")
            jammers.append(Jammer(
                LocalPoint(float(j["x"]), float(j["y"])),
                eirp=float(j.get("eirp", 1.0)),
                band=str(j.get("band", d.get("band", "L1"))),
                duty_cycle=float(j.get("duty_cycle", 1.0)),
                tx_pattern=SRPModel.from_dict(tx) if tx else None,
                tx_heading=float(j.get("tx_heading", 0.0)),
                signal=str(j.get("signal", "noise")),
                offset_mhz=float(j.get("offset_mhz", 0.0)),
                bandwidth_mhz=float(j.get("bandwidth_mhz", 2.0)),
            ))
        poses = tuple(ScanPose(LocalPoint(float(p["x"]), float(p["y"])), float(p.get("psi", 0.0)))
                      for p in d.get("poses", []))
        if "grid" in d:
            grid = GridSpec.from_dict(d["grid"])
        else:
            grid = default_grid([p.position for p in poses] + [j.position for j in jammers])
        srp_d = d.get("srp", {"hpbw_deg": 60.0})
        srp = SRPModel.from_dict(srp_d) if "components" in srp_d else SRPModel.gaussian(float(srp_d["hpbw_deg"]))
        wind = d.get("wind", {})
        jit = d.get("jitter", {})
        return cls(
            tuple(jammers), poses, grid, srp,
            noise_floor=float(d.get("noise_floor", 1e-8)),
            path_loss_exponent=float(d.get("path_loss_exponent", 2.0)),
            wind=Wind(float(wind.get("speed", 0.0)), float(wind.get("direction", 0.0))),
            jitter=JitterModel(float(jit.get("stddev", HOVER_STDDEV_M)), float(jit.get("wind_gain", 0.0))),
            band=str(d.get("band", "L1")),
            step_deg=float(d.get("step_deg", 10.0)),
            n_avg=int(d.get("n_avg", 16)),
            denial_margin_db=float(d.get("denial_margin_db", DEFAULT_DENIAL_MARGIN_DB)),
            seed=int(d.get("seed", 0)),
        )


def load_scenario(path) -> Scenario:
    return Scenario.from_dict(json.loads(Path(path).read_text()))


def default_grid(points, resolution=5.0, pad=200.0) -> GridSpec:
    e = [p[0] for p in points]
    n = [p[1] for p in points]
    return GridSpec.covering(min(e) - pad, max(e) + pad, min(n) - pad, max(n) + pad, resolution)


def denial_radius(jammer: Jammer, noise_floor: float, exponent: float,
                  margin_db: float = DEFAULT_DENIAL_MARGIN_DB) -> float:
    """Range inside which isotropic received power exceeds the noise by `margin_db`."""
    if noise_floor <= 0:
        return 0.0
    limit = noise_floor * 10.0 ** (margin_db / 10.0)
    return (jammer.eirp * jammer.duty_cycle / limit) ** (1.0 / exponent)


def received_power(jammer: Jammer, rx: ScanPose, rx_srp: SRPModel, exponent: float = 2.0) -> float:
    d = math.dist(rx.position, jammer.position)
    if d == 0.0:
        raise ValueError("receiver and jammer coincide")
    g_rx = srp_eval(rx_srp, bearing_diff(rx.heading, bearing_to(rx.position, jammer.position)))
    g_tx = 1.0
    if jammer.tx_pattern is not None:
        g_tx = srp_eval(jammer.tx_pattern, bearing_diff(jammer.tx_heading, bearing_to(jammer.position, rx.position)))
    return jammer.eirp * d ** (-exponent) * g_rx * g_tx * jammer.duty_cycle


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def perturb_pose(pose: ScanPose, jitter: JitterModel, wind: Wind = Wind(), seed=None) -> ScanPose:
    """Hover position error: isotropic Gaussian, widened along the wind."""
    rng = _rng(seed)
    along_sd = jitter.stddev + jitter.wind_gain * wind.speed
    a, c = rng.standard_normal(2)
    w = math.radians(wind.direction)
    u = np.array([math.sin(w), math.cos(w)])
    v = np.array([-u[1], u[0]])
    disp = a * along_sd * u + c * jitter.stddev * v
    return ScanPose(LocalPoint(pose.position.east + disp[0], pose.position.north + disp[1]), pose.heading)


def simulate_scan(scenario: Scenario, pose_index: int, step_deg: float | None = None, seed=None) -> HorizonScan:
    """Synthetic horizon scan from one nominal pose.

    Each heading dwell sees a jittered position; the scan is referenced to
    the mean of those positions. Noise per dwell is the floor times a
    chi-squared draw averaged over `n_avg` periodograms.
    """
    step = scenario.step_deg if step_deg is None else step_deg
    n = step_count(step)
    base = scenario.seed if seed is None else seed
    rng = np.random.default_rng([int(base), int(pose_index)])
    nominal = scenario.poses[pose_index]
    jammers = [j for j in scenario.jammers if j.band == scenario.band]
    headings = np.arange(n) * float(step)
    powers = np.zeros(n)
    positions = np.zeros((n, 2))
    for k, h in enumerate(headings):
        rx = perturb_pose(ScanPose(nominal.position, float(h)), scenario.jitter, scenario.wind, rng)
        positions[k] = rx.position
        p = sum(received_power(j, rx, scenario.srp, scenario.path_loss_exponent) for j in jammers)
        if scenario.noise_floor > 0:
            p += scenario.noise_floor * rng.gamma(scenario.n_avg, 1.0 / scenario.n_avg)
        powers[k] = p
    pose = reference_pose(PoseTrace(np.arange(n, dtype=float), positions, headings))
    return HorizonScan(pose, scenario.band, float(step), headings, relative(powers))


def simulate_scans(scenario: Scenario, seed=None, step_deg=None) -> list[HorizonScan]:
    return [simulate_scan(scenario, k, step_deg, seed) for k in range(len(scenario.poses))]


def simulate_iq(jammers, mask: ChannelMask, n: int, seed=None, sample_rate_hz: float = 20e6,
                noise_power: float = 1.0, powers=None) -> IQBuffer:
    """Baseband capture centred on `mask`: white noise plus jammer signals.

    `powers` gives each jammer's mean per-sample power (defaults to its
    EIRP). Tones sit at `offset_mhz`, chirps sweep `bandwidth_mhz` around
    it once per buffer, band noise is flat over `bandwidth_mhz`.
    """
    if n < 16 or n & (n - 1):
        raise ValueError("n must be a power of two >= 16")
    rng = _rng(seed)
    t = np.arange(n) / sample_rate_hz
    x = np.sqrt(noise_power / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    powers = [j.eirp for j in jammers] if powers is None else list(powers)
    for jam, pw in zip(jammers, powers):
        f0 = jam.offset_mhz * 1e6
        phase0 = rng.uniform(0.0, 2.0 * np.pi)
        if jam.signal == "tone":
            s = np.exp(1j * (2.0 * np.pi * f0 * t + phase0))
        elif jam.signal == "chirp":
            bw = jam.bandwidth_mhz * 1e6
            rate = bw / (n / sample_rate_hz)
            s = np.exp(1j * (2.0 * np.pi * ((f0 - bw / 2.0) * t + 0.5 * rate * t ** 2) + phase0))
        else:
            shaped = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            f = np.fft.fftfreq(n, d=1.0 / sample_rate_hz)
            shaped[np.abs(f - f0) > jam.bandwidth_mhz * 1e6 / 2.0] = 0.0
            s = np.fft.ifft(shaped)
            s = s / np.sqrt(np.mean(np.abs(s) ** 2))
        if jam.duty_cycle < 1.0:
            period = max(n // 8, 1)
            s = s * ((np.arange(n) % period) < jam.duty_cycle * period)
        x = x + np.sqrt(pw) * s
    return IQBuffer(x, sample_rate_hz, mask.center_mhz)


def synthetic_pattern(seed=None, band_mhz: float = 1575.42, hpbw_deg: float = 70.0,
                      backlobe_db: float = -15.0, skew_deg: float = 0.0, ripple_db: float = 0.5,
                      peak_db: float = 3.0, spacing_deg: float = 5.0) -> RadiationPattern:
    """Patch-like azimuth pattern with a skewed main lobe, shoulders and back lobe."""
    rng = _rng(seed)
    b = np.arange(0.0, 360.0, spacing_deg)
    s = bearing_diff(b, 0.0)
    sigma = hpbw_deg / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    main = np.exp(-0.5 * ((s - skew_deg) / sigma) ** 2)
    shoulders = 0.12 * (np.exp(-0.5 * ((s - 100.0) / 20.0) ** 2) + np.exp(-0.5 * ((s + 95.0) / 22.0) ** 2))
    back = 10.0 ** (backlobe_db / 10.0) * np.exp(-0.5 * ((np.abs(s) - 180.0) / 30.0) ** 2)
    lin = main + shoulders + back + 1e-3
    db = 10.0 * np.log10(lin) + peak_db + ripple_db * rng.standard_normal(b.size)
    return RadiationPattern(band_mhz, b, db)
