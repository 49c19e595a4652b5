import numpy as np
import pytest

from contact_topopt.material import Elasticity, FrictionParams
from contact_topopt.mesh import DomainSpec, Mesh, generate_domain

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rectangle(width=2.0, height=1.0, h=0.25, **boundary):
    sides = dict(bottom="C", right="F", top="F, N 0.5 1.0", left="D")
    sides.update(boundary)
    return generate_domain(DomainSpec("rectangle", dict(width=width, height=height), h, sides))


def single_triangle(points=((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)), tags="DFF"):
    return Mesh(np.array(points, float), [[0, 1, 2]], [[0, 1], [1, 2], [2, 0]], list(tags))


@pytest.fixture
def elas():
    return Elasticity(1.0, 0.3)


@pytest.fixture
def fp():
    return FrictionParams()


@pytest.fixture(scope="session")
def small_rect():
    return rectangle()


@pytest.fixture(scope="session")
def hole_mesh():
    return generate_domain(DomainSpec("square_with_hole", dict(side=1.0, hole_center=(0.5, 0.5), hole_radius=0.2),
                                      0.1, dict(bottom="C", right="D", top="F, N 0.4 0.6", left="D", hole="F")))


@pytest.fixture(scope="session")
def lshape_mesh():
    return generate_domain(DomainSpec("lshape", dict(outer=2.0, notch=1.0), 0.25,
                                      dict(bottom="C", notch_side="F", notch_top="F", right="F, N 1.0 1.5",
                                           top="D", left="F")))
