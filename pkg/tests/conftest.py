import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rfimap.geometry import GridSpec, LocalPoint
from rfimap.scanops import HorizonScan, ScanPose

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_scan(x, y, powers, band="L1", step=None):
    powers = np.asarray(powers, dtype=float)
    step = 360.0 / powers.size if step is None else step
    return HorizonScan(ScanPose(LocalPoint(x, y)), band, step, np.arange(powers.size) * step, powers)


@pytest.fixture
def small_grid():
    return GridSpec(LocalPoint(-100.0, -100.0), 5.0, 40, 40)


def gaussian_blob(grid, center, sigmas, angle_deg):
    """Density of a rotated Gaussian; `angle_deg` is the major-axis bearing from north."""
    east, north = grid.centers()
    a = math.radians(angle_deg)
    u = np.array([math.sin(a), math.cos(a)])
    v = np.array([-u[1], u[0]])
    de, dn = east - center[0], north - center[1]
    s = de * u[0] + dn * u[1]
    t = de * v[0] + dn * v[1]
    return np.exp(-0.5 * ((s / sigmas[0]) ** 2 + (t / sigmas[1]) ** 2))
