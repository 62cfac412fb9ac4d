import numpy as np
import pytest

from sanp.raster import DemGrid, synth_terrain


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def terrain64():
    return synth_terrain(64, 1, 0.6)


def plane_grid(nrows=40, ncols=50, a=0.3, b=-0.2, c=7.0, cell=5.0, origin=(1000.0, 2000.0)):
    """Raster sampled from z = a*x + b*y + c at pixel centres."""
    g = DemGrid(np.zeros((nrows, ncols), np.float32), np.zeros((nrows, ncols), bool), cell, origin)
    rr, cc = np.mgrid[0:nrows, 0:ncols]
    x, y = g.pixel_center(rr, cc)
    return g.with_elevations((a * x + b * y + c).astype(np.float32))


# criterion number -> (status, title, detail); filled by the acceptance suite
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2} {status}: {title} ({detail})")
