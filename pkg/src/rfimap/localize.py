"""Transmitter regions, best-fit ellipses and survey geometry quality."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .fusion import FusedMap
from .geometry import LocalPoint, bearing_to, circular_mean, local_to_geodetic

CONTOUR_SIGMA = 2.0
DEGENERATE_QUALITY = 0.3
ELLIPSE_SEGMENTS = 64


@dataclass(frozen=True)
class RegionEstimate:
    cells: np.ndarray  # (n, 2) of (i, j)
    centroid: LocalPoint
    peak: LocalPoint
    total: float
    peak_value: float

    @property
    def size(self) -> int:
        return len(self.cells)


@dataclass(frozen=True)
class EllipseFit:
    """Second-moment ellipse of one region.

    Axes are the 2-sigma semi-axes of the density-weighted covariance. When
    the region runs off the map along its major axis `long_axis` is
    ``math.inf`` and `center` is the ellipse focus nearest the scans;
    `fitted_long_axis` keeps the clipped estimate.
    """

    center: LocalPoint
    long_axis: float
    short_axis: float
    heading: float  # major-axis angle from local north, (-90, 90]
    centroid: LocalPoint
    peak: LocalPoint
    fitted_long_axis: float
    contour_sigma: float = CONTOUR_SIGMA

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.long_axis)

    @property
    def major_dir(self) -> np.ndarray:
        h = math.radians(self.heading)
        return np.array([math.sin(h), math.cos(h)])

    def polygon(self, segments: int = ELLIPSE_SEGMENTS) -> list[tuple[float, float]]:
        """Closed counter-clockwise ring around the centroid."""
        u = self.major_dir
        v = np.array([-u[1], u[0]])
        t = 2.0 * np.pi * np.arange(segments) / segments
        pts = (np.asarray(self.centroid)[None, :]
               + np.outer(self.fitted_long_axis * np.cos(t), u)
               + np.outer(self.short_axis * np.sin(t), v))
        ring = [(float(e), float(n)) for e, n in pts]
        return ring + [ring[0]]


def extract_regions(fmap: FusedMap) -> list[RegionEstimate]:
    """8-connected groups of non-zero cells, largest total density first."""
    v = fmap.values
    labels, n = ndimage.label(v > 0, structure=np.ones((3, 3), dtype=int))
    east, north = fmap.grid.centers()
    regions = []
    for lab in range(1, n + 1):
        jj, ii = np.nonzero(labels == lab)
        w = v[jj, ii]
        total = float(w.sum())
        ce = float(np.sum(w * east[jj, ii]) / total)
        cn = float(np.sum(w * north[jj, ii]) / total)
        k = int(np.argmax(w))
        regions.append(RegionEstimate(
            np.column_stack([ii, jj]),
            LocalPoint(ce, cn),
            fmap.grid.cell_center(int(ii[k]), int(jj[k])),
            total,
            float(w[k]),
        ))
    regions.sort(key=lambda r: (-r.total, r.peak.north, r.peak.east))
    return regions


def _fold_heading(vec) -> float:
    h = math.degrees(math.atan2(vec[0], vec[1]))
    while h > 90.0:
        h -= 180.0
    while h <= -90.0:
        h += 180.0
    return h


def _touches_edge_along(region, fmap, mean, u, edge_fraction) -> bool:
    g = fmap.grid
    i, j = region.cells[:, 0], region.cells[:, 1]
    on_edge = (i == 0) | (j == 0) | (i == g.width - 1) | (j == g.height - 1)
    strong = fmap.values[j, i] >= edge_fraction * region.peak_value
    for ii, jj in region.cells[on_edge & strong]:
        d = np.asarray(g.cell_center(int(ii), int(jj))) - mean
        norm = float(np.hypot(*d))
        if norm > 0 and abs(float(d @ u)) >= math.cos(math.radians(45.0)) * norm:
            return True
    return False


def fit_ellipse(region: RegionEstimate, fmap: FusedMap, scan_positions=None,
                edge_fraction: float = 0.5) -> EllipseFit:
    """Density-weighted covariance ellipse of a region.

    Edge cells count as clipping only when their density reaches
    `edge_fraction` of the region peak, so faint tails of a blob reaching
    the border do not make the fit unbounded.
    """
    g = fmap.grid
    east, north = g.centers()
    i, j = region.cells[:, 0], region.cells[:, 1]
    w = fmap.values[j, i]
    pts = np.column_stack([east[j, i], north[j, i]])
    mean = np.array(region.centroid)
    d = pts - mean
    cov = (w[:, None] * d).T @ d / w.sum()
    evals, evecs = np.linalg.eigh(cov)
    u = evecs[:, 1]
    long_fit = max(CONTOUR_SIGMA * math.sqrt(max(evals[1], 0.0)), g.resolution)
    short = max(CONTOUR_SIGMA * math.sqrt(max(evals[0], 0.0)), g.resolution)
    heading = _fold_heading(u)
    u = np.array([math.sin(math.radians(heading)), math.cos(math.radians(heading))])

    center = region.centroid
    long_axis = long_fit
    if _touches_edge_along(region, fmap, mean, u, edge_fraction):
        long_axis = math.inf
        if scan_positions is not None and len(scan_positions):
            ref = np.mean(np.asarray(scan_positions, dtype=float), axis=0)
            f = math.sqrt(max(long_fit ** 2 - short ** 2, 0.0))
            foci = [mean + f * u, mean - f * u]
            best = min(foci, key=lambda p: float(np.hypot(*(p - ref))))
            center = LocalPoint(float(best[0]), float(best[1]))
    return EllipseFit(center, long_axis, short, heading, region.centroid, region.peak, long_fit)


def localization_error(fit: EllipseFit, truth) -> float:
    """Distance from the estimate to the true position; uses the peak cell for unbounded fits."""
    est = fit.center if fit.bounded else fit.peak
    return math.hypot(est[0] - truth[0], est[1] - truth[1])


def geometry_quality(scan_positions, target) -> float:
    """One minus the resultant length of bearings from `target` to each scan.

    `target` is a region (its centroid is used) or a point. Zero means all
    scans lie on one bearing; one means they surround the target evenly.
    """
    if len(scan_positions) < 2:
        raise ValueError("geometry quality needs at least two scan positions")
    c = target.centroid if isinstance(target, RegionEstimate) else target
    bearings = []
    for p in scan_positions:
        p = getattr(p, "position", p)
        if (p[0], p[1]) != (c[0], c[1]):
            bearings.append(bearing_to(c, p))
    if not bearings:
        raise ValueError("all scans coincide with the target")
    _, r = circular_mean(bearings)
    return min(max(1.0 - r, 0.0), 1.0)


def _coords(p, origin):
    if origin is None:
        return [float(p[0]), float(p[1])]
    lat, lon = local_to_geodetic(p, *origin)
    return [lon, lat]


def results_geojson(fits: list[EllipseFit], qualities: list[float | None], origin=None) -> dict:
    """FeatureCollection with peak, centre and ellipse per region.

    Coordinates are local ``[east, north]`` metres unless a geodetic
    ``origin=(lat, lon)`` is given, in which case they are ``[lon, lat]``.
    """
    features = []
    for k, (fit, q) in enumerate(zip(fits, qualities)):
        props = {
            "region": k,
            "long_axis_m": fit.long_axis if fit.bounded else "unbounded",
            "short_axis_m": fit.short_axis,
            "heading_deg": fit.heading,
            "quality": q,
            "degenerate": q is not None and q < DEGENERATE_QUALITY,
            "contour": f"{fit.contour_sigma:g}-sigma",
        }
        for kind, geom in (
            ("peak", {"type": "Point", "coordinates": _coords(fit.peak, origin)}),
            ("center" if fit.bounded else "focus",
             {"type": "Point", "coordinates": _coords(fit.center, origin)}),
            ("ellipse", {"type": "Polygon",
                         "coordinates": [[_coords(p, origin) for p in fit.polygon()]]}),
        ):
            features.append({"type": "Feature", "geometry": geom, "properties": dict(props, kind=kind)})
    fc = {"type": "FeatureCollection", "features": features}
    if origin is None:
        fc["crs_note"] = "local east/north metres"
    return fc
