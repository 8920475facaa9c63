"""Command-line entry point.

Every stage reads and writes plain files so the pipeline can be scripted:

    rfimap simulate scenario.json --out sim/
    rfimap fuse sim/scan_*.json --srp sim/srp.json --out result/
    rfimap psd capture.bin --out spectrum/
    rfimap plan plan.json
    rfimap export result/heatmap.json --origin 59.0,10.0 --out export/

Exit codes: 0 success, 1 no region found, 2 input error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import shutil
import string
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .antenna import load_srp
from .fusion import DEFAULT_ALPHA, fuse_scans, heatmap_from_dict, threshold, write_heatmap
from .geometry import GridSpec, LocalPoint, local_to_geodetic
from .localize import (DEGENERATE_QUALITY, extract_regions, fit_ellipse, geometry_quality,
                       results_geojson)
from .scanops import HorizonScan, ScanPose, read_scan_log, step_count, write_scan_log
from .simulator import Scenario, received_power, simulate_iq, simulate_scans
from .spectrum import (IQBuffer, band_power, detect_peaks, load_band_config, psd, psd_averaged,
                       read_iq, write_iq)

log = logging.getLogger("rfimap")

EXIT_OK = 0
EXIT_NO_REGION = 1
EXIT_INPUT = 2

FUSE_PAD_M = 500.0


class InputError(Exception):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


@contextmanager
def staged_output(out_dir):
    """Yield a scratch directory whose files are moved to `out_dir` on success."""
    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        yield tmp
        out.mkdir(exist_ok=True)
        for f in sorted(tmp.iterdir()):
            os.replace(f, out / f.name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"{path}: no such file")
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})")


def _parse_pair(text, what):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise InputError(f"{what} must look like A,B, got {text!r}")
    if not (math.isfinite(a) and math.isfinite(b)):
        raise InputError(f"{what} must be finite")
    return a, b


def _regrid(grid: GridSpec, res: float | None) -> GridSpec:
    if res is None or res == grid.resolution:
        return grid
    if not res > 0:
        raise InputError("--grid-res must be positive")
    return GridSpec.covering(*grid.extent, resolution=res)


# simulate ------------------------------------------------------------------

def _iq_for_pose(scenario: Scenario, scan: HorizonScan, k: int, seed: int, n: int) -> IQBuffer:
    mask = load_band_config().channels.get(scenario.band)
    if mask is None:
        raise InputError(f"band {scenario.band!r} has no channel definition for IQ output")
    jammers = [j for j in scenario.jammers if j.band == scenario.band]
    rx = ScanPose(scenario.poses[k].position, scan.peak_heading)
    noise = scenario.noise_floor if scenario.noise_floor > 0 else 1.0
    powers = [received_power(j, rx, scenario.srp, scenario.path_loss_exponent) / noise for j in jammers]
    return simulate_iq(jammers, mask, n, seed=np.random.default_rng([seed, k, 1]),
                       noise_power=1.0 if scenario.noise_floor > 0 else 0.0, powers=powers)


def cmd_simulate(args) -> int:
    try:
        scenario = Scenario.from_dict(_read_json(args.scenario))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{args.scenario}: {exc}")
    seed = scenario.seed if args.seed is None else args.seed
    step = scenario.step_deg if args.step_deg is None else args.step_deg
    try:
        step_count(step)
    except ValueError as exc:
        raise InputError(str(exc))
    if args.band is not None:
        scenario = dataclasses.replace(scenario, band=args.band)
    grid = _regrid(scenario.grid, args.grid_res)
    scans = simulate_scans(scenario, seed=seed, step_deg=step)

    with staged_output(args.out) as tmp:
        for k, scan in enumerate(scans):
            write_scan_log(tmp / f"scan_{k:02d}.json", scan, grid)
            if args.iq:
                write_iq(tmp / f"iq_{k:02d}.bin", _iq_for_pose(scenario, scan, k, seed, args.iq_n))
        truth = {
            "band": scenario.band,
            "seed": seed,
            "jammers": [{"x": j.position.east, "y": j.position.north, "eirp": j.eirp, "band": j.band}
                        for j in scenario.jammers],
            "poses": [{"x": p.position.east, "y": p.position.north} for p in scenario.poses],
        }
        (tmp / "truth.json").write_text(_dumps(truth))
        (tmp / "srp.json").write_text(_dumps(scenario.srp.to_dict()))
    print(f"wrote {len(scans)} scan logs to {args.out}")
    return EXIT_OK


# psd -----------------------------------------------------------------------

def cmd_psd(args) -> int:
    try:
        iq = read_iq(args.iq)
    except FileNotFoundError as exc:
        raise InputError(f"{exc.filename}: no such file")
    except (KeyError, ValueError) as exc:
        raise InputError(f"{args.iq}: {exc}")
    try:
        cfg = load_band_config(args.bands)
    except FileNotFoundError:
        raise InputError(f"{args.bands}: no such file")
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{args.bands}: {exc}")

    m = args.segments
    if m < 1 or iq.n % m or (iq.n // m) < 16:
        raise InputError(f"cannot split {iq.n} samples into {m} segments")
    if m == 1:
        frame = psd(iq)
    else:
        seg = iq.n // m
        frame = psd_averaged([IQBuffer(iq.samples[k * seg:(k + 1) * seg], iq.sample_rate_hz,
                                       iq.center_freq_mhz) for k in range(m)])

    min_prom = None
    if args.prominence_db is not None:
        min_prom = float(np.median(frame.power)) * 10.0 ** (args.prominence_db / 10.0)
    peaks = detect_peaks(frame, min_prom, cfg.allocations)

    doc = frame.to_dict()
    doc.update(center_freq_mhz=iq.center_freq_mhz, sample_rate_hz=iq.sample_rate_hz, segments=m)
    if args.band is not None:
        mask = cfg.channels.get(args.band)
        if mask is None:
            raise InputError(f"unknown band {args.band!r}")
        try:
            doc["band_power"] = {args.band: band_power(frame, mask)}
        except ValueError as exc:
            raise InputError(str(exc))

    from .plotting import psd_figure

    with staged_output(args.out) as tmp:
        (tmp / "psd.json").write_text(_dumps(doc))
        (tmp / "peaks.json").write_text(_dumps({"peaks": [p.to_dict() for p in peaks]}))
        psd_figure(tmp / "psd.png", frame, peaks)

    print(f"{'marker':<7}{'freq_mhz':>12}{'power_db':>10}  attribution")
    for k, p in enumerate(peaks):
        attr = ", ".join(f"{a.allocation} (order {a.order})" for a in p.attribution) or "-"
        print(f"{string.ascii_uppercase[k % 26]:<7}{p.freq_mhz:>12.4f}{10 * math.log10(p.power):>10.2f}  {attr}")
    return EXIT_OK


# fuse ----------------------------------------------------------------------

def _load_logs(paths, band):
    logs = []
    for p in paths:
        try:
            logs.append((p, *read_scan_log(p)))
        except FileNotFoundError:
            raise InputError(f"{p}: no such file")
        except json.JSONDecodeError as exc:
            raise InputError(f"{p}: invalid JSON ({exc})")
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{p}: {exc}")
    if band is not None:
        logs = [l for l in logs if l[1].band == band]
        if not logs:
            raise InputError(f"no scan log is in band {band!r}")
    bands = sorted({l[1].band for l in logs})
    if len(bands) > 1:
        raise InputError(f"scan logs mix bands {bands}; pick one with --band")
    return logs


def _fuse_grid(args, logs) -> GridSpec:
    if args.grid is not None:
        try:
            grid = GridSpec.from_dict(_read_json(args.grid))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{args.grid}: {exc}")
    else:
        grids = {g for _, _, g in logs if g is not None}
        if len(grids) > 1:
            raise InputError("scan logs carry different grids; pass --grid to override")
        if grids:
            grid = grids.pop()
        else:
            pts = [s.pose.position for _, s, _ in logs]
            e = [p[0] for p in pts]
            n = [p[1] for p in pts]
            grid = GridSpec.covering(min(e) - FUSE_PAD_M, max(e) + FUSE_PAD_M,
                                     min(n) - FUSE_PAD_M, max(n) + FUSE_PAD_M, args.grid_res or 5.0)
    return _regrid(grid, args.grid_res)


def _num(x: float) -> float:
    # avoid printing -0.00
    return round(x, 2) + 0.0


def _region_table(fits, qualities) -> str:
    head = (f"{'Region':<7}{'Local Easting':>15}{'Local Northing':>16}{'Long Axis':>12}"
            f"{'Short Axis':>12}{'Heading on Local northing':>27}{'Quality':>9}")
    rows = [head, "-" * len(head)]
    for k, (fit, q) in enumerate(zip(fits, qualities)):
        name = string.ascii_uppercase[k % 26] + ("" if fit.bounded else "*")
        long_txt = f"{fit.long_axis:.2f} m" if fit.bounded else "unbound"
        q_txt = "-" if q is None else f"{q:.3f}"
        rows.append(f"{name:<7}{_num(fit.center.east):>13.2f} m{_num(fit.center.north):>14.2f} m{long_txt:>12}"
                    f"{fit.short_axis:>10.2f} m{_num(fit.heading):>26.2f}°{q_txt:>9}")
    if any(not f.bounded for f in fits):
        rows.append("* unbounded fit, position is the ellipse focus nearest the scans")
    return "\n".join(rows)


def cmd_fuse(args) -> int:
    if not 0.0 < args.alpha < 1.0:
        raise InputError(f"--alpha must lie in (0, 1), got {args.alpha}")
    logs = _load_logs(args.logs, args.band)
    try:
        srp = load_srp(args.srp)
    except FileNotFoundError:
        raise InputError(f"{args.srp}: no such file")
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{args.srp}: {exc}")
    origin = _parse_pair(args.origin, "--origin") if args.origin else None
    grid = _fuse_grid(args, logs)
    scans = [s for _, s, _ in logs]
    positions = [s.pose.position for s in scans]
    log.info("fusing %d scans on a %dx%d grid", len(scans), grid.width, grid.height)

    fused = fuse_scans(scans, srp, grid, weighted=not args.unweighted)
    if fused.values.max() <= 0:
        thr, fits, qualities = fused, [], []
    else:
        thr = threshold(fused, args.alpha)
        regions = extract_regions(thr)
        fits = [fit_ellipse(r, thr, positions) for r in regions]
        qualities = [geometry_quality(positions, r) if len(positions) >= 2 else None for r in regions]

    truth = None
    if args.truth:
        t = _read_json(args.truth)
        truth = [(j["x"], j["y"]) for j in t.get("jammers", [])]

    from .plotting import heatmap_figure

    with staged_output(args.out) as tmp:
        write_heatmap(tmp, thr)
        (tmp / "results.geojson").write_text(_dumps(results_geojson(fits, qualities, origin)))
        heatmap_figure(tmp / "heatmap.png", fused, fits, positions, truth or ())

    if not fits:
        print("no region: fused map is empty", file=sys.stderr)
        return EXIT_NO_REGION
    print(_region_table(fits, qualities))
    for k, q in enumerate(qualities):
        if q is not None and q < DEGENERATE_QUALITY:
            print(f"warning: region {string.ascii_uppercase[k % 26]}: degenerate geometry "
                  f"(quality {q:.3f} < {DEGENERATE_QUALITY})", file=sys.stderr)
    return EXIT_OK


# plan ----------------------------------------------------------------------

def cmd_plan(args) -> int:
    doc = _read_json(args.plan)
    try:
        poses = [LocalPoint(float(p["x"]), float(p["y"])) for p in doc.get("poses", [])]
        hints = [LocalPoint(float(r["x"]), float(r["y"])) for r in doc.get("regions", [])]
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise InputError(f"{args.plan}: {exc}")
    if args.region:
        hints = [LocalPoint(*_parse_pair(r, "--region")) for r in args.region]
    if len(poses) < 2:
        raise InputError("a plan needs at least two scan poses")
    if not hints:
        raise InputError("no region hint; add 'regions' to the plan or pass --region")

    report = {"poses": len(poses), "regions": [], "warnings": []}
    for k, h in enumerate(hints):
        try:
            q = geometry_quality(poses, h)
        except ValueError as exc:
            raise InputError(f"region {k}: {exc}")
        entry = {"x": h.east, "y": h.north, "quality": q, "degenerate": q < DEGENERATE_QUALITY}
        report["regions"].append(entry)
        if entry["degenerate"]:
            report["warnings"].append(
                f"region {k} at ({h.east:g}, {h.north:g}): degenerate geometry, quality {q:.3f}")

    if args.out:
        with staged_output(args.out) as tmp:
            (tmp / "plan_report.json").write_text(_dumps(report))
    for k, r in enumerate(report["regions"]):
        print(f"region {k} ({r['x']:g}, {r['y']:g}): quality {r['quality']:.3f}")
    for w in report["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


# export --------------------------------------------------------------------

def _to_geodetic(coords, origin):
    if coords and isinstance(coords[0], (int, float)):
        lat, lon = local_to_geodetic(coords, *origin)
        return [lon, lat]
    return [_to_geodetic(c, origin) for c in coords]


def cmd_export(args) -> int:
    try:
        hmap = heatmap_from_dict(_read_json(args.heatmap))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{args.heatmap}: {exc}")
    origin = _parse_pair(args.origin, "--origin") if args.origin else None
    results = None
    if args.results:
        results = _read_json(args.results)
        if results.get("type") != "FeatureCollection":
            raise InputError(f"{args.results}: not a GeoJSON FeatureCollection")
        if origin is not None:
            if "crs_note" not in results:
                raise InputError(f"{args.results}: coordinates are already geodetic")
            results = dict(results)
            results.pop("crs_note")
            results["features"] = [
                {**f, "geometry": {**f["geometry"],
                                   "coordinates": _to_geodetic(f["geometry"]["coordinates"], origin)}}
                for f in results["features"]]

    e0, e1, n0, n1 = hmap.grid.extent
    bounds = {"grid": hmap.grid.to_dict(), "extent_m": [e0, e1, n0, n1]}
    if origin is not None:
        corners = [local_to_geodetic((e, n), *origin) for e, n in ((e0, n0), (e1, n0), (e1, n1), (e0, n1))]
        bounds["corners_latlon"] = [list(c) for c in corners]

    from .plotting import heatmap_figure

    with staged_output(args.out) as tmp:
        write_heatmap(tmp, hmap)
        (tmp / "bounds.json").write_text(_dumps(bounds))
        heatmap_figure(tmp / "heatmap.png", hmap)
        if results is not None:
            (tmp / "results.geojson").write_text(_dumps(results))
    print(f"exported {hmap.grid.width}x{hmap.grid.height} map to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rfimap", description="Interference mapping from UAV horizon scans.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize scan logs from a scenario")
    p.add_argument("scenario")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--step-deg", type=float)
    p.add_argument("--band")
    p.add_argument("--grid-res", type=float)
    p.add_argument("--iq", action="store_true", help="also write one IQ capture per pose")
    p.add_argument("--iq-n", type=int, default=4096)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("psd", help="periodogram and peak report of an IQ capture")
    p.add_argument("iq")
    p.add_argument("--out", required=True)
    p.add_argument("--bands", help="band/allocation table (defaults to the packaged one)")
    p.add_argument("--band", help="also report the power in this channel")
    p.add_argument("--segments", type=int, default=1, help="average this many sub-captures")
    p.add_argument("--prominence-db", type=float, help="peak prominence over the median bin")
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("fuse", help="fuse scan logs and localize transmitters")
    p.add_argument("logs", nargs="+")
    p.add_argument("--srp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid")
    p.add_argument("--grid-res", type=float)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--unweighted", action="store_true", help="single projection along the peak heading")
    p.add_argument("--band")
    p.add_argument("--origin", help="LAT,LON of the local origin for geodetic output")
    p.add_argument("--truth", help="truth.json from simulate, drawn on the figure")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("plan", help="survey geometry quality for candidate regions")
    p.add_argument("plan")
    p.add_argument("--region", action="append", help="E,N of a hypothesized transmitter")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("export", help="re-export a heatmap, optionally georeferenced")
    p.add_argument("heatmap")
    p.add_argument("--out", required=True)
    p.add_argument("--origin")
    p.add_argument("--results")
    p.set_defaults(func=cmd_export)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
