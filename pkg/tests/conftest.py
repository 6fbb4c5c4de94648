import numpy as np
import pytest

from stitmix.measure import HyperplaneMeasure

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def axis():
    return HyperplaneMeasure.axis_parallel()


@pytest.fixture
def iso():
    return HyperplaneMeasure.isotropic()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_polygon(rng, n=None, scale=1.0):
    """Convex polygon: hull of random points around the origin."""
    from scipy.spatial import ConvexHull

    from stitmix.geometry import Polygon, window_tag

    n = n or int(rng.integers(3, 12))
    while True:
        pts = rng.normal(size=(max(n, 3) + 3, 2)) * scale
        hull = ConvexHull(pts)
        vs = pts[hull.vertices]
        if hull.volume > 1e-3 * scale**2:
            return Polygon([tuple(v) for v in vs], [window_tag(1)] * len(vs))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
