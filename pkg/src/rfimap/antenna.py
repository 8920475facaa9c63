"""Antenna radiation patterns and the standard radiation pattern (SRP).

A measured azimuth pattern is normalized to a 0 dB peak, symmetrized about
boresight, tapered to zero at the backplane and then approximated by a
mixture of Gaussians in relative bearing. The mixture is the SRP used to
project heading powers onto the map.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, least_squares

from .geometry import bearing_diff, normalize_bearing

BACKPLANE_LIMIT = 0.01
FIT_RMS_LIMIT = 0.05
# taper and fit aim slightly below the limit so rounding never crosses it
_BACKPLANE_TARGET = 0.008
_FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


class SRPFitError(RuntimeError):
    """Mixture fit did not converge to an acceptable residual."""

    def __init__(self, message, residual_rms):
        super().__init__(message)
        self.residual_rms = residual_rms


@dataclass(frozen=True)
class RadiationPattern:
    """Azimuth gain samples for one band.

    `bearings` are relative to the antenna major axis in degrees, strictly
    increasing within [0, 360); `gains_db` are power gains in dB.
    """

    band_mhz: float
    bearings: np.ndarray
    gains_db: np.ndarray

    def __post_init__(self):
        b = np.array(self.bearings, dtype=float)
        g = np.array(self.gains_db, dtype=float)
        if b.ndim != 1 or b.shape != g.shape:
            raise ValueError("bearings and gains must be 1-D and of equal length")
        if b.size < 8:
            raise ValueError(f"need at least 8 pattern samples, got {b.size}")
        if not np.all(np.isfinite(b)) or not np.all(np.isfinite(g)):
            raise ValueError("pattern contains non-finite values")
        if b[0] < 0 or b[-1] >= 360 or np.any(np.diff(b) <= 0):
            raise ValueError("bearings must be strictly increasing within [0, 360)")
        b.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "bearings", b)
        object.__setattr__(self, "gains_db", g)

    @property
    def linear(self) -> np.ndarray:
        return 10.0 ** (self.gains_db / 10.0)

    @property
    def peak_db(self) -> float:
        return float(np.max(self.gains_db))

    def gain_at(self, bearing) -> np.ndarray:
        """Linear gain, periodic linear interpolation between samples."""
        return np.interp(normalize_bearing(np.asarray(bearing, dtype=float)),
                         self.bearings, self.linear, period=360.0)

    def to_dict(self) -> dict:
        return {
            "band_mhz": self.band_mhz,
            "samples": [[float(b), float(g)] for b, g in zip(self.bearings, self.gains_db)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RadiationPattern":
        samples = sorted((normalize_bearing(float(b)), float(g)) for b, g in d["samples"])
        b, g = zip(*samples) if samples else ((), ())
        return cls(float(d["band_mhz"]), np.array(b), np.array(g))


@dataclass(frozen=True)
class SRPModel:
    """Even Gaussian mixture over relative bearing.

    Each component ``(w, mu, sigma)`` contributes the mirrored pair
    ``w/2 * (N(d - mu) + N(d + mu))`` with unnormalized Gaussians of width
    `sigma`, so the model is exactly even in ``d``.
    """

    components: tuple[tuple[float, float, float], ...]
    residual_rms: float = field(default=0.0, compare=False)

    def __post_init__(self):
        comps = tuple((float(w), float(mu), float(s)) for w, mu, s in self.components)
        if not comps:
            raise ValueError("SRP model needs at least one component")
        for w, mu, s in comps:
            if w < 0 or s <= 0 or not all(map(math.isfinite, (w, mu, s))):
                raise ValueError(f"invalid mixture component {(w, mu, s)}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def gaussian(cls, hpbw_deg: float) -> "SRPModel":
        """Single zero-mean Gaussian with the given half-power beamwidth."""
        return cls(((1.0, 0.0, hpbw_deg / _FWHM_PER_SIGMA),))

    def __call__(self, dpsi):
        return srp_eval(self, dpsi)

    def to_dict(self) -> dict:
        return {"components": [list(c) for c in self.components], "residual_rms": self.residual_rms}

    @classmethod
    def from_dict(cls, d: dict) -> "SRPModel":
        return cls(tuple(tuple(c) for c in d["components"]), float(d.get("residual_rms", 0.0)))


@dataclass(frozen=True)
class GainMask:
    band_mhz: float
    scale: float


def _mixture(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    for w, mu, s in params.reshape(-1, 3):
        k = -0.5 / (s * s)
        if mu == 0.0:
            out += w * np.exp(k * (x * x))
        else:
            a = np.exp(k * (x - mu) ** 2)
            b = np.exp(k * (x + mu) ** 2)
            out += 0.5 * w * (a + b)
    return out


def srp_wrapped(model: SRPModel, x: np.ndarray) -> np.ndarray:
    """SRP of bearings already wrapped to [-180, 180]; skips the re-wrap."""
    return np.maximum(_mixture(np.asarray(model.components, dtype=float), x), 0.0)


def srp_eval(model: SRPModel, dpsi):
    """Gain of the SRP at relative bearing `dpsi` (degrees, any range)."""
    x = bearing_diff(dpsi, 0.0)
    val = _mixture(np.asarray(model.components, dtype=float), np.atleast_1d(x).astype(float))
    val = np.maximum(val, 0.0)
    if np.ndim(x) == 0:
        return float(val[0])
    return val


def half_power_beamwidth(model: SRPModel) -> float:
    """Full width in degrees where the SRP stays at or above half its boresight gain."""
    peak = srp_eval(model, 0.0)
    level = 0.5 * peak
    x = np.arange(0.0, 180.0 + 1e-9, 0.1)
    y = srp_eval(model, x)
    below = np.nonzero(y < level)[0]
    if below.size == 0:
        return math.inf
    k = int(below[0])
    edge = brentq(lambda t: srp_eval(model, t) - level, x[k - 1], x[k], xtol=1e-12)
    return 2.0 * edge


def normalize_pattern(rp: RadiationPattern) -> RadiationPattern:
    """Shift the pattern so its peak sits at 0 dB."""
    return RadiationPattern(rp.band_mhz, rp.bearings, rp.gains_db - rp.peak_db)


def _taper_power(theta: np.ndarray, g: np.ndarray) -> float:
    # back sector wide enough that interpolation at 180 only uses constrained samples
    b = np.sort(normalize_bearing(theta))
    gaps = np.diff(np.concatenate([b, [b[0] + 360.0]]))
    sector = 180.0 - float(np.max(gaps))
    cos2 = np.cos(np.radians(theta) / 2.0) ** 2
    p = 0.0
    for t, gi, c in zip(theta, g, cos2):
        if abs(t) >= sector and gi > _BACKPLANE_TARGET:
            p = max(p, math.log(_BACKPLANE_TARGET / gi) / math.log(c))
    return p


def symmetrize(rp: RadiationPattern) -> RadiationPattern:
    """Impose symmetry, boresight maximum and a decaying backplane.

    Mirror samples are averaged, every sample is clipped to the boresight
    gain, and a ``cos^2(theta/2) ** p`` taper with the smallest sufficient
    ``p`` pulls the back sector below the backplane limit.
    """
    bearings = np.array(rp.bearings)
    if not np.any(bearings == 0.0):
        bearings = np.concatenate([[0.0], bearings])
    signed = bearing_diff(bearings, 0.0)
    g = 0.5 * (rp.gain_at(signed) + rp.gain_at(-signed))
    g0 = float(g[bearings == 0.0][0])
    if g0 <= 0:
        raise ValueError("pattern has no gain along the major axis")
    g = np.minimum(g, g0) / g0
    p = _taper_power(signed, g)
    if p > 0:
        g = g * (np.cos(np.radians(signed) / 2.0) ** 2) ** p
    g[bearings == 0.0] = 1.0
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(np.maximum(g, 1e-300))
    return RadiationPattern(rp.band_mhz, bearings, db)


def _starts(n: int, sigma0: float) -> list[np.ndarray]:
    starts = []
    sig = np.geomspace(sigma0 * 0.6, sigma0 * 1.6, n) if n > 1 else np.array([sigma0])
    starts.append(np.column_stack([np.full(n, 1.0 / n), np.zeros(n), sig]).ravel())
    if n > 1:
        mus = np.linspace(0.0, min(150.0, 3 * sigma0), n)
        starts.append(np.column_stack([np.full(n, 1.0 / n), mus, np.full(n, sigma0)]).ravel())
        w = np.full(n, 0.2 / (n - 1))
        w[0] = 0.8
        starts.append(np.column_stack([w, np.linspace(0.0, 90.0, n), np.full(n, sigma0 * 0.7)]).ravel())
    return starts


def _solve(x, y, n, sigma0, fix_means, penalty):
    lo = np.tile([0.0, 0.0, 1.0], n)
    hi = np.tile([np.inf, 180.0, 180.0], n)
    free = np.ones(3 * n, dtype=bool)
    if fix_means:
        free[1::3] = False
    back = np.array([180.0])

    def resid(q, base):
        p = base.copy()
        p[free] = q
        r = _mixture(p, x) - y
        excess = max(0.0, float(_mixture(p, back)[0]) - _BACKPLANE_TARGET)
        return np.concatenate([r, [penalty * excess]])

    best = None
    for p0 in _starts(n, sigma0):
        if fix_means:
            p0 = p0.copy()
            p0[1::3] = 0.0
        sol = least_squares(resid, p0[free], bounds=(lo[free], hi[free]), args=(p0,),
                            method="trf", x_scale="jac", max_nfev=4000)
        p = p0.copy()
        p[free] = sol.x
        if best is None or sol.cost < best[0]:
            best = (sol.cost, p)
    return best[1]


def _peak_at_zero(params) -> bool:
    x = np.arange(0.0, 180.0 + 1e-9, 0.1)
    y = _mixture(params, x)
    return bool(np.max(y) <= y[0] * (1.0 + 1e-12))


def fit_srp(rp: RadiationPattern, n_components: int = 3) -> SRPModel:
    """Least-squares Gaussian-mixture fit to a symmetrized pattern.

    Both free-mean and zero-mean mixtures are tried from several starts; the
    lowest-residual candidate with its maximum on boresight and a quiet
    backplane wins. The returned model is rescaled so that ``SRP(0) == 1``.
    """
    if not 1 <= n_components <= 5:
        raise ValueError("n_components must be between 1 and 5")
    x = bearing_diff(rp.bearings, 0.0)
    y = rp.linear
    above = np.abs(x)[y >= 0.5 * y.max()]
    sigma0 = max(float(above.max()) * 2.0 / _FWHM_PER_SIGMA, 5.0) if above.size else 30.0

    # keep the best fit that meets every constraint, free means or zero means
    best = None
    for fix_means in (False, True):
        for scale in (1.0, 0.75, 1.33):
            for penalty in (100.0, 1e3, 1e4, 1e5):
                p = _solve(x, y, n_components, sigma0 * scale, fix_means, penalty)
                p0 = float(_mixture(p, np.array([0.0]))[0])
                if p0 <= 0:
                    break
                p[0::3] /= p0
                if _mixture(p, np.array([180.0]))[0] <= BACKPLANE_LIMIT:
                    if _peak_at_zero(p):
                        rms = float(np.sqrt(np.mean((_mixture(p, x) - y) ** 2)))
                        if best is None or rms < best[0]:
                            best = (rms, p)
                    break
    if best is None:
        raise SRPFitError("mixture fit could not satisfy the SRP constraints", math.inf)
    params = best[1]

    rms = float(np.sqrt(np.mean((_mixture(params, x) - y) ** 2)))
    if rms > FIT_RMS_LIMIT:
        raise SRPFitError(f"SRP fit residual {rms:.4f} exceeds {FIT_RMS_LIMIT}", rms)
    comps = tuple((float(w), float(mu), float(s)) for w, mu, s in params.reshape(-1, 3))
    # drop components that the fit switched off
    comps = tuple(c for c in comps if c[0] > 0) or comps[:1]
    return SRPModel(comps, residual_rms=rms)


def band_masks(patterns: list[RadiationPattern]) -> list[GainMask]:
    """Per-band scale equalizing peak sensitivity to the least sensitive band.

    Takes the patterns before peak normalization, since the masks are
    derived from the absolute peak gains.
    """
    if not patterns:
        raise ValueError("need at least one pattern")
    peaks = np.array([10.0 ** (p.peak_db / 10.0) for p in patterns])
    floor = peaks.min()
    return [GainMask(p.band_mhz, float(floor / pk)) for p, pk in zip(patterns, peaks)]


def srp_from_pattern(rp: RadiationPattern, n_components: int = 3) -> SRPModel:
    return fit_srp(symmetrize(normalize_pattern(rp)), n_components)


def load_srp(path) -> SRPModel:
    """Read an SRP model, or fit one if the file holds a radiation pattern."""
    d = json.loads(Path(path).read_text())
    if "components" in d:
        return SRPModel.from_dict(d)
    if "samples" in d:
        return srp_from_pattern(RadiationPattern.from_dict(d))
    if "hpbw_deg" in d:
        return SRPModel.gaussian(float(d["hpbw_deg"]))
    raise ValueError(f"{path}: neither an SRP model nor a radiation pattern")
