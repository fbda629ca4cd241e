import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import geoxray as gx


@pytest.fixture(scope="session")
def euclidean():
    return gx.metric_from_config("euclidean")


@pytest.fixture(scope="session")
def conformal05():
    return gx.metric_from_config("conformal-radial", [0.05])


@pytest.fixture(scope="session")
def conformal10():
    return gx.metric_from_config("conformal-radial", [0.1])


@pytest.fixture(scope="session")
def hexagon24():
    """Hexagon fan refined once: 24 triangles."""
    return gx.refine(gx.polygon_fan_tiling(6))


@pytest.fixture()
def anchor_triangle_tiling():
    """One triangle with a vertex on the boundary at angle 0, cone [170, 190] deg."""
    r = 0.8
    p0 = np.array([1.0, 0.0])
    p1 = p0 + r * np.array([math.cos(math.radians(170)), math.sin(math.radians(170))])
    p2 = p0 + r * np.array([math.cos(math.radians(190)), math.sin(math.radians(190))])
    return gx.Tiling([p0, p1, p2], [[0, 1, 2]])


def chord_start(metric, boundary_angle, exit_angle):
    """Unit tangent of the chord between two boundary angles."""
    a = np.array([math.cos(boundary_angle), math.sin(boundary_angle)])
    b = np.array([math.cos(exit_angle), math.sin(exit_angle)])
    return gx.unit_tangent(metric, a, b - a)
