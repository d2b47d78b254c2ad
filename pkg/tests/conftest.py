import numpy as np
import pytest

from nfnls.grid import GridSpec


@pytest.fixture
def small_grid():
    # 8 modes per unit box, resolved boxes |k| <= 3
    return GridSpec(L=16 * np.pi, M=64)


@pytest.fixture
def mid_grid():
    return GridSpec(L=16 * np.pi, M=256)


@pytest.fixture
def rng(request):
    # one stream per test, keyed by the test name
    from nfnls.lab import rng_for

    return rng_for(0, request.node.name)


def random_band_limited(grid, rng, kmax, halfwidth=0.6):
    from nfnls.grid import make_boxdata

    coeffs = {k: complex(rng.normal(), rng.normal()) for k in range(-kmax, kmax + 1)}
    return make_boxdata(grid, coeffs, profile_halfwidth=halfwidth)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k].line())
