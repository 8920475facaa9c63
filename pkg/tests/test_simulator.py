import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfimap.antenna import SRPModel, srp_eval
from rfimap.geometry import GridSpec, LocalPoint
from rfimap.scanops import ScanPose
from rfimap.simulator import (HOVER_STDDEV_M, Jammer, JitterModel, Scenario, Wind, default_grid,
                              denial_radius, load_scenario, perturb_pose, received_power,
                              simulate_iq, simulate_scan, simulate_scans, synthetic_pattern)
from rfimap.spectrum import ChannelMask, IQBuffer, band_power, psd, psd_averaged

SRP60 = SRPModel.gaussian(60.0)
L1 = ChannelMask("L1", 1575.42, 4.092)
GRID = GridSpec(LocalPoint(-1000, -1000), 10.0, 200, 200)


def pose(x, y, h=0.0):
    return ScanPose(LocalPoint(x, y), h)


def test_received_power_examples():
    j = Jammer(LocalPoint(0, 0))
    near = received_power(j, pose(0, -100), SRP60)
    far = received_power(j, pose(0, -200), SRP60)
    assert near / far == pytest.approx(4.0)
    away = received_power(j, pose(0, -100, 180.0), SRP60)
    assert away / near == pytest.approx(srp_eval(SRP60, 180.0)) and away / near <= 0.01
    half = received_power(Jammer(LocalPoint(0, 0), duty_cycle=0.5), pose(0, -100), SRP60)
    assert half == pytest.approx(near / 2)
    cubic = received_power(j, pose(0, -100), SRP60, exponent=3.0)
    assert cubic == pytest.approx(1e-6)


def test_directional_transmitter():
    j = Jammer(LocalPoint(0, 0), tx_pattern=SRPModel.gaussian(40.0), tx_heading=90.0)
    east = received_power(j, pose(100, 0, 270.0), SRP60)
    west = received_power(j, pose(-100, 0, 90.0), SRP60)
    assert east == pytest.approx(1e-4) and west / east == pytest.approx(srp_eval(SRPModel.gaussian(40.0), 180.0))


def test_received_power_coincident():
    with pytest.raises(ValueError):
        received_power(Jammer(LocalPoint(1, 1)), pose(1, 1), SRP60)


@given(st.floats(0, 360), st.floats(50, 1000), st.floats(1.01, 5), st.sampled_from([1.5, 2.0, 3.0, 4.0]))
def test_scan_energy_monotone_in_distance(bearing, r, k, n):
    b = math.radians(bearing)
    total = lambda d: sum(received_power(Jammer(LocalPoint(d * math.sin(b), d * math.cos(b))), pose(0, 0, h), SRP60, n)
                          for h in range(0, 360, 10))
    assert total(k * r) <= total(r)


def test_empty_scenario_flat_zero_scan():
    sc = Scenario((), (pose(0, 0),), GRID, noise_floor=0.0)
    scan = simulate_scan(sc, 0)
    assert not scan.rel_power.any() and scan.headings.size == 36


def test_jammer_due_north_peaks_at_zero():
    sc = Scenario((Jammer(LocalPoint(0, 500)),), (pose(0, 0),), GRID, srp=SRPModel.gaussian(20.0))
    assert simulate_scan(sc, 0).peak_heading == 0.0


def test_simulation_is_deterministic():
    sc = Scenario((Jammer(LocalPoint(30, 400)),), (pose(0, 0), pose(300, 300)), GRID, seed=5,
                  wind=Wind(4.0, 90.0), jitter=JitterModel(0.142, 0.05))
    a, b = simulate_scans(sc), simulate_scans(sc)
    for x, y in zip(a, b):
        assert np.array_equal(x.rel_power, y.rel_power) and x.pose == y.pose
    c = simulate_scans(sc, seed=6)
    assert not np.array_equal(a[0].rel_power, c[0].rel_power)


def test_scan_only_sees_its_band():
    sc = Scenario((Jammer(LocalPoint(0, 500), band="L2"),), (pose(0, 0),), GRID, noise_floor=0.0)
    assert not simulate_scan(sc, 0).rel_power.any()


def test_scenario_validation():
    with pytest.raises(ValueError, match="exponent"):
        Scenario((), (pose(0, 0),), GRID, path_loss_exponent=5.0)
    with pytest.raises(ValueError, match="denial"):
        Scenario((Jammer(LocalPoint(0, 50), eirp=10.0),), (pose(0, 0),), GRID)
    with pytest.raises(ValueError):
        Scenario((), (), GRID)
    with pytest.raises(ValueError):
        Scenario((), (pose(0, 0),), GRID, step_deg=7.0)
    with pytest.raises(ValueError):
        Jammer(LocalPoint(0, 0), signal="pulse")


def test_denial_radius():
    j = Jammer(LocalPoint(0, 0), eirp=1.0)
    # 1 / (1e-8 * 1e4) = 1e4 m^2 at exponent 2
    assert denial_radius(j, 1e-8, 2.0) == pytest.approx(100.0)
    assert denial_radius(j, 0.0, 2.0) == 0.0


def test_scenario_from_json(tmp_path):
    p = tmp_path / "s.json"
    p.write_text('{"jammers": [{"x": 10, "y": 20, "eirp": 0.5, "signal": "tone"}],'
                 ' "poses": [{"x": 400, "y": 0, "psi": 90}, {"x": -400, "y": 0}],'
                 ' "srp": {"hpbw_deg": 45}, "wind": {"speed": 3, "direction": 270}, "seed": 9}')
    sc = load_scenario(p)
    assert sc.jammers[0].position == (10.0, 20.0) and sc.jammers[0].signal == "tone"
    assert sc.poses[0].heading == 90.0 and sc.seed == 9
    assert sc.grid == default_grid([q.position for q in sc.poses] + [sc.jammers[0].position])
    assert sc.srp == SRPModel.gaussian(45.0)


def test_perturb_zero_jitter():
    p = pose(3.0, 4.0, 10.0)
    assert perturb_pose(p, JitterModel(0.0), Wind(0.0), seed=1) == p


def _draws(jitter, wind, n=10_000):
    rng = np.random.default_rng(0)
    return np.array([perturb_pose(pose(0, 0), jitter, wind, rng).position for _ in range(n)])


def test_perturb_stddev_calibrated():
    d = _draws(JitterModel(), Wind())
    assert np.std(d[:, 0]) == pytest.approx(HOVER_STDDEV_M, rel=0.1)
    assert np.std(d[:, 1]) == pytest.approx(HOVER_STDDEV_M, rel=0.1)


def test_perturb_wind_inflates_along_wind():
    d = _draws(JitterModel(0.142, 0.05), Wind(5.0, 90.0))
    along, cross = np.std(d[:, 0]), np.std(d[:, 1])
    assert along > cross
    assert along == pytest.approx(0.142 + 0.25, rel=0.1)


def test_iq_noise_only_flat():
    x = simulate_iq([], L1, 8192, seed=3)
    seg = [IQBuffer(x.samples[k * 128:(k + 1) * 128], x.sample_rate_hz, x.center_freq_mhz) for k in range(64)]
    p = psd_averaged(seg).power
    assert p.mean() == pytest.approx(1.0, rel=0.05)
    assert p.max() / p.mean() < 1.8 and p.min() / p.mean() > 0.4


def test_chirp_conserves_energy_vs_tone():
    tone = simulate_iq([Jammer(LocalPoint(0, 0), signal="tone")], L1, 4096, seed=1, noise_power=0.0, powers=[2.0])
    chirp = simulate_iq([Jammer(LocalPoint(0, 0), signal="chirp", bandwidth_mhz=2.0)], L1, 4096, seed=1,
                        noise_power=0.0, powers=[2.0])
    ft, fc = psd(tone), psd(chirp)
    assert fc.power.sum() == pytest.approx(ft.power.sum(), rel=1e-9)
    assert band_power(fc, L1) == pytest.approx(band_power(ft, L1), rel=0.02)
    inside = np.abs(fc.freqs_mhz - L1.center_mhz) <= 1.0
    assert fc.power[inside].sum() / fc.power.sum() > 0.95
    assert np.count_nonzero(fc.power > 0.01 * fc.power.max()) > 50


def test_iq_duty_cycle_and_noise_jammer():
    j = Jammer(LocalPoint(0, 0), signal="noise", bandwidth_mhz=4.0, duty_cycle=0.5)
    x = simulate_iq([j], L1, 4096, seed=2, noise_power=0.0, powers=[1.0])
    assert np.mean(np.abs(x.samples) ** 2) == pytest.approx(0.5, rel=0.1)
    off = (np.arange(4096) % 512) >= 256
    assert not x.samples[off].any()
    with pytest.raises(ValueError):
        simulate_iq([], L1, 100)


def test_synthetic_pattern_deterministic():
    a, b = synthetic_pattern(4), synthetic_pattern(4)
    assert np.array_equal(a.gains_db, b.gains_db)
    assert not np.array_equal(a.gains_db, synthetic_pattern(5).gains_db)
