import pytest

from lkcurv.variety import builtin

COMPLEX_GERMS = ["smooth_line", "node", "cusp", "three_lines", "cone_over_plane_curve_1", "quadric_cone", "cone_over_plane_curve_3"]
CURVE_GERMS = ["smooth_line", "node", "cusp", "three_lines"]
GLOBALS = ["parabola_global", "nodal_cubic_global"]
REAL_GERMS = ["real_cone", "real_plane"]


@pytest.fixture(scope="session")
def space():
    return builtin


@pytest.fixture(scope="session")
def node():
    return builtin("node")


@pytest.fixture(scope="session")
def smooth_line():
    return builtin("smooth_line")


@pytest.fixture(scope="session")
def cusp():
    return builtin("cusp")


@pytest.fixture(scope="session")
def quadric():
    return builtin("quadric_cone")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
