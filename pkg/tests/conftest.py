import pytest

from esfem import LevelSetSurface, ManufacturedProblem

import acceptance_log


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)


@pytest.fixture(params=["sphere", "ellipsoid", "circle", "ellipse"])
def surface(request):
    return LevelSetSurface.from_name(request.param)


@pytest.fixture
def sphere():
    return LevelSetSurface.from_name("sphere")


@pytest.fixture
def ellipsoid():
    return LevelSetSurface.from_name("ellipsoid")


@pytest.fixture
def circle():
    return LevelSetSurface.from_name("circle")


@pytest.fixture
def ellipse():
    return LevelSetSurface.from_name("ellipse")


@pytest.fixture
def ellipsoid_problem(ellipsoid):
    return ManufacturedProblem(ellipsoid)
