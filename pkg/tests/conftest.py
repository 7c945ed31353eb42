import numpy as np
import pytest

from srvdist.curves import Curve


def random_curve(rng, n, d, closed=False, scale=1.0):
    """Random polygon with vertices in general position."""
    if closed:
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))
        rad = rng.uniform(0.6, 1.4, n)
        pts = np.zeros((n, d))
        pts[:, 0] = rad * np.cos(ang)
        if d > 1:
            pts[:, 1] = rad * np.sin(ang)
        if d > 2:
            pts[:, 2:] = 0.4 * rng.standard_normal((n, d - 2))
        return Curve(scale * pts, closed=True)
    return Curve(scale * np.cumsum(rng.standard_normal((n, d)), axis=0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one verdict line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[num])
