import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfimap.antenna import SRPModel, half_power_beamwidth
from rfimap.geometry import GridSpec, LocalPoint, bearing_diff
from rfimap.scanops import (DIVISORS_360, HorizonScan, PoseTrace, ScanPose, build_scan, build_scans,
                            default_step, read_scan_log, reference_pose, relative, snap_step,
                            step_count, write_scan_log)
from rfimap.simulator import Jammer, received_power, simulate_iq
from rfimap.spectrum import ChannelMask, PSDFrame, psd

L1 = ChannelMask("L1", 1575.42, 4.092)
FREQS = 1575.42 + np.fft.fftfreq(64, 1 / 20.48)


def frames_from(powers, step, position=(0.0, 0.0)):
    # flat spectra whose L1 band power scales with `powers`
    return [PSDFrame(np.full(64, p), FREQS, k * step, LocalPoint(*position)) for k, p in enumerate(powers)]


def test_reference_pose_examples():
    one = reference_pose(PoseTrace([0.0], [[3.0, 4.0]], [17.0]))
    assert one.position == (3.0, 4.0) and one.heading == pytest.approx(17.0)
    sym = reference_pose(PoseTrace([0, 1, 2, 3], [[1, 0], [-1, 0], [0, 2], [0, -2]], [0, 0, 0, 0]))
    assert sym.position == (0.0, 0.0)
    wrap = reference_pose(PoseTrace([0, 1], [[0, 0], [0, 0]], [350.0, 10.0]))
    assert abs(bearing_diff(wrap.heading, 0.0)) < 1e-9


def test_pose_trace_validation():
    with pytest.raises(ValueError):
        PoseTrace([0, 0], [[0, 0], [1, 1]], [0, 0])
    with pytest.raises(ValueError):
        PoseTrace([0, 1], [[0, 0]], [0, 0])


@given(st.lists(st.floats(0, 360), min_size=1, max_size=20), st.floats(-720, 720))
def test_reference_heading_rotation_equivariant(headings, delta):
    n = len(headings)
    pos = np.zeros((n, 2))
    h = np.array(headings)
    a = reference_pose(PoseTrace(np.arange(n), pos, h))
    b = reference_pose(PoseTrace(np.arange(n), pos, h + delta))
    from rfimap.geometry import circular_mean
    if circular_mean(h)[1] > 1e-6:
        assert abs(bearing_diff(b.heading, a.heading + delta)) < 1e-6


def test_build_scan_uniform():
    scan = build_scan(frames_from([2.0] * 12, 30), L1, 30)
    assert np.array_equal(scan.rel_power, np.ones(12))
    assert scan.band == "L1" and scan.step_deg == 30.0


def test_build_scan_dominant_heading():
    p = [1.0] * 12
    p[4] = 5.0
    scan = build_scan(frames_from(p, 30), L1, 30)
    assert scan.rel_power[4] == 1.0 and np.all(np.delete(scan.rel_power, 4) < 1.0)
    assert scan.peak_heading == 120.0


def test_build_scan_simulated_jammer_east():
    jam = Jammer(LocalPoint(500.0, 0.0))
    srp = SRPModel.gaussian(40.0)
    frames = []
    for k in range(36):
        pw = received_power(jam, ScanPose(LocalPoint(0, 0), 10.0 * k), srp)
        iq = simulate_iq([jam], L1, 256, seed=k, noise_power=1e-9, powers=[pw])
        frames.append(psd(iq, heading=10.0 * k, position=LocalPoint(0, 0)))
    scan = build_scan(frames, L1, 10)
    assert abs(bearing_diff(scan.peak_heading, 90.0)) <= 5.0


@given(st.lists(st.floats(0.0, 1e6), min_size=12, max_size=12).filter(lambda v: max(v) > 0),
       st.floats(1e-6, 1e6))
def test_build_scan_normalized_and_scale_invariant(powers, scale):
    a = build_scan(frames_from(powers, 30), L1, 30)
    b = build_scan(frames_from([scale * p for p in powers], 30), L1, 30)
    assert np.all((a.rel_power >= 0) & (a.rel_power <= 1)) and a.rel_power.max() == 1.0
    assert np.allclose(a.rel_power, b.rel_power, rtol=1e-12, atol=1e-15)


def test_build_scan_nearest_bin_and_errors():
    fr = frames_from([1.0] * 4, 90)
    jittered = [PSDFrame(f.power, f.freqs_mhz, f.heading + 20.0, f.position) for f in fr]
    assert build_scan(jittered, L1, 90).headings.tolist() == [0, 90, 180, 270]
    with pytest.raises(ValueError, match="incomplete"):
        build_scan(fr[:3], L1, 90)
    with pytest.raises(ValueError, match="heading bin"):
        build_scan(fr + fr[:1], L1, 90)
    avg = build_scan(fr + [PSDFrame(np.full(64, 3.0), FREQS, 0.0, LocalPoint(0, 0))], L1, 90,
                     average_duplicates=True)
    assert avg.rel_power[0] == 1.0 and avg.rel_power[1] == 0.5
    with pytest.raises(ValueError, match="positions"):
        build_scan([PSDFrame(f.power, f.freqs_mhz, f.heading) for f in fr], L1, 90)


def test_build_scans_per_band_gain():
    e6 = ChannelMask("E6", 1575.42, 2.0)
    scans = build_scans(frames_from([1.0, 2.0, 1.0, 1.0], 90), [L1, e6], 90, gains={"E6": 0.5})
    assert set(scans) == {"L1", "E6"}
    assert np.array_equal(scans["E6"].rel_power, scans["L1"].rel_power)


def test_step_count():
    assert step_count(10) == 36 and step_count(72) == 5
    with pytest.raises(ValueError):
        step_count(7)
    with pytest.raises(ValueError):
        step_count(0)


def test_default_step_examples():
    m = SRPModel(((1.0, 0.0, 30.57),))
    assert half_power_beamwidth(m) == pytest.approx(71.98684877659612, abs=1e-9)
    assert default_step(m) == 72
    assert snap_step(41.0) == 40
    assert default_step(SRPModel.gaussian(41.0)) == 40
    with pytest.raises(ValueError):
        default_step(SRPModel(((1.0, 0.0, 1e4),)))


@given(st.floats(0.5, 360))
def test_snap_step_is_divisor(w):
    d = snap_step(w)
    assert 360 % d == 0
    assert all(abs(d - w) <= abs(o - w) for o in DIVISORS_360)


def test_relative_zero_and_negative():
    assert np.array_equal(relative([0.0, 0.0]), [0.0, 0.0])
    with pytest.raises(ValueError):
        HorizonScan(ScanPose(LocalPoint(0, 0)), "L1", 180, [0, 180], [1.0, -0.1])
    with pytest.raises(ValueError):
        HorizonScan(ScanPose(LocalPoint(0, 0)), "L1", 180, [0, 180], [1.0, math.nan])


def test_scan_log_roundtrip(tmp_path):
    scan = build_scan(frames_from([1.0, 3.0, 2.0, 0.5], 90, (12.5, -3.0)), L1, 90)
    grid = GridSpec(LocalPoint(-50, -50), 5.0, 20, 20)
    write_scan_log(tmp_path / "a.json", scan)
    write_scan_log(tmp_path / "b.json", scan, grid)
    s1, g1 = read_scan_log(tmp_path / "a.json")
    s2, g2 = read_scan_log(tmp_path / "b.json")
    assert g1 is None and g2 == grid
    for s in (s1, s2):
        assert s.pose == scan.pose and np.array_equal(s.rel_power, scan.rel_power)
