import math

import pytest

from trapgap.geometry import CellGeometry, canonical_geometry
from trapgap.mesh import build_cell_mesh


@pytest.fixture(scope="session")
def canonical():
    return canonical_geometry()


@pytest.fixture(scope="session")
def canonical_mesh(canonical):
    return build_cell_mesh(canonical, 1 / 16)


@pytest.fixture(scope="session")
def free_geom():
    return CellGeometry(1.0, None)


@pytest.fixture(scope="session")
def free_mesh(free_geom):
    return build_cell_mesh(free_geom, 1 / 16)


PI2 = math.pi**2


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in RESULTS.values():
        terminalreporter.write_line(line)
