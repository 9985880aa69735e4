import pytest

from horodrift.boundary import VisualConfig
from horodrift.groups import FiniteSupportMeasure
from horodrift.spaces import FreeGroupTree, StarSpace, UpperHalfPlane

HALFPLANE_DELTA = 0.70


@pytest.fixture(scope="session")
def tree():
    return FreeGroupTree(2)


@pytest.fixture(scope="session")
def plane():
    return UpperHalfPlane(HALFPLANE_DELTA)


@pytest.fixture(scope="session")
def star():
    return StarSpace(4)


@pytest.fixture(scope="session")
def vis():
    return VisualConfig(2.0)


@pytest.fixture(scope="session")
def f2(tree):
    return FiniteSupportMeasure.uniform(tree, tree.generators)


@pytest.fixture(scope="session")
def ab(tree):
    return FiniteSupportMeasure.dirac(tree, tree.parse_isometry("ab"))


@pytest.fixture(scope="session")
def parabolic(plane):
    atoms = [plane.parse_isometry([1, 1, 0, 1]), plane.parse_isometry([1, 0, 1, 1])]
    return FiniteSupportMeasure.create(plane, atoms, [0.5, 0.5])


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    lines = test_acceptance.REPORT
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])
