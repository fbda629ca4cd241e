import math

import numpy as np
import pytest

import geoxray as gx
from geoxray.geometry import disk_grid, speed_defect

from conftest import chord_start
from oracles import fd_christoffel, fd_covariant_hessian_min, observed_order


# ---------------------------------------------------------------------------
# christoffel symbols
# ---------------------------------------------------------------------------

def test_christoffel_euclidean_vanishes(euclidean):
    gamma = euclidean.christoffel(np.array([0.3, 0.1]))
    assert np.all(gamma == 0.0)


def test_christoffel_radial_center_vanishes(conformal10):
    gamma = conformal10.christoffel(np.array([0.0, 0.0]))
    assert np.allclose(gamma, 0.0, atol=1e-15)


def test_christoffel_radial_closed_form(conformal10):
    # alpha = 0.1 at (0.5, 0): d(lam) = (0.1, 0)
    gamma = conformal10.christoffel(np.array([0.5, 0.0]))
    expected = np.zeros((2, 2, 2))
    expected[0, 0, 0] = 0.1
    expected[0, 1, 1] = -0.1
    expected[1, 0, 1] = expected[1, 1, 0] = 0.1
    assert np.allclose(gamma, expected, atol=1e-15)


@pytest.mark.parametrize("family,params,point", [
    ("conformal-radial", [0.1], [0.5, 0.0]),
    ("conformal-radial", [0.05], [-0.2, 0.6]),
    ("conformal-gaussian", [0.3, 0.1, -0.2, 0.5], [0.3, 0.2]),
])
def test_christoffel_matches_finite_difference_oracle(family, params, point):
    metric = gx.metric_from_config(family, params)
    gamma = metric.christoffel(np.array(point))
    oracle = fd_christoffel(metric, np.array(point))
    assert np.max(np.abs(gamma - oracle)) < 1e-8
    # symmetry in the lower pair
    assert np.allclose(gamma, np.swapaxes(gamma, 1, 2))


def test_christoffel_outside_domain_rejected(conformal10):
    with pytest.raises(gx.DomainError):
        conformal10.christoffel(np.array([1.2, 0.0]))


def test_metric_is_spd_on_disk():
    for family, params in [("euclidean", []), ("conformal-radial", [0.1]),
                           ("conformal-gaussian", [0.4, 0.2, 0.1, 0.6])]:
        metric = gx.metric_from_config(family, params)
        assert metric.spd_margin(disk_grid(25)) > 0.0


# ---------------------------------------------------------------------------
# geodesic tracing
# ---------------------------------------------------------------------------

def test_euclidean_diameter(euclidean):
    path = gx.trace_geodesic(euclidean, gx.boundary_tangent(euclidean, math.pi, 0.0), step=1e-3)
    assert abs(path.tau - 2.0) <= 1e-9
    assert path.endpoints_on_boundary


def test_euclidean_chord_length_oracle(euclidean):
    # chord at distance 0.5 from the origin: length 2*sqrt(1 - 0.25) = sqrt(3)
    d = 0.5
    half = math.acos(d)
    start = chord_start(euclidean, half, -half)
    path = gx.trace_geodesic(euclidean, start, step=1e-3)
    assert abs(path.tau - math.sqrt(3.0)) <= 1e-8


def test_conformal_tau_self_convergence(conformal05):
    start = gx.boundary_tangent(conformal05, math.pi, 0.0)
    tau_h = gx.trace_geodesic(conformal05, start, step=1e-3).tau
    tau_h2 = gx.trace_geodesic(conformal05, start, step=5e-4).tau
    assert abs(tau_h - tau_h2) <= 1e-6


def test_interior_start_gives_maximal_path(euclidean):
    start = gx.unit_tangent(euclidean, [0.2, 0.1], [1.0, 0.0])
    path = gx.trace_geodesic(euclidean, start, step=1e-2)
    assert path.endpoints_on_boundary
    # the maximal horizontal line through y = 0.1 has length 2*sqrt(1 - 0.01)
    assert abs(path.tau - 2.0 * math.sqrt(1.0 - 0.01)) <= 1e-9


def test_outward_boundary_start_rejected(euclidean):
    with pytest.raises(gx.DomainError):
        gx.trace_geodesic(euclidean, gx.UnitTangent(np.array([1.0, 0.0]), np.array([1.0, 0.0])))


def test_trapping_cap_raises():
    metric = gx.metric_from_config("conformal-radial", [-2.5])
    start = gx.unit_tangent(metric, [0.5, 0.0], [0.0, 1.0])
    with pytest.raises(gx.TrappingSuspectedError):
        gx.trace_geodesic(metric, start, step=1e-2)


def test_unit_speed_preserved(conformal10):
    start = gx.boundary_tangent(conformal10, 0.3, math.pi + 0.5)
    path = gx.trace_geodesic(conformal10, start, step=1e-2)
    assert speed_defect(conformal10, path) <= 1e-8


def test_reversibility(conformal10):
    start = gx.boundary_tangent(conformal10, 0.7, 0.7 + math.pi - 0.4)
    path = gx.trace_geodesic(conformal10, start, step=5e-3)
    back = gx.trace_geodesic(
        conformal10, gx.unit_tangent(conformal10, path.x[-1], -path.v[-1]), step=5e-3)
    assert np.hypot(*(back.x[-1] - path.x[0])) <= 1e-6


def test_flat_reduction_straight_chord(euclidean):
    start = chord_start(euclidean, 1.0, -2.0)
    path = gx.trace_geodesic(euclidean, start, step=1e-2)
    a, b = path.x[0], path.x[-1]
    d = (b - a) / np.hypot(*(b - a))
    # distance of every sample to the chord line
    offsets = (path.x - a) @ np.array([-d[1], d[0]])
    assert np.max(np.abs(offsets)) <= 1e-9


def test_tau_step_halving_order():
    metric = gx.metric_from_config("conformal-radial", [0.3])
    start = gx.boundary_tangent(metric, 0.9, 0.9 + math.pi + 0.3)
    taus = [gx.trace_geodesic(metric, start, step=s).tau for s in (1e-2, 5e-3, 2.5e-3)]
    assert observed_order(taus) >= 3.5


def test_sample_spacing_bounded(conformal05):
    path = gx.trace_geodesic(conformal05, gx.boundary_tangent(conformal05, 0.0, math.pi), step=1e-2)
    assert path.max_spacing() <= 1e-2 + 1e-12


# ---------------------------------------------------------------------------
# parallel transport
# ---------------------------------------------------------------------------

def test_transport_flat_is_constant(euclidean):
    path = gx.trace_geodesic(euclidean, chord_start(euclidean, 0.5, 2.5), step=1e-2)
    w = gx.parallel_transport(euclidean, path, np.array([0.0, 1.0]))
    assert np.max(np.abs(w - np.array([0.0, 1.0]))) <= 1e-12


@pytest.mark.parametrize("family,params", [("euclidean", []), ("conformal-radial", [0.1])])
def test_transport_of_velocity_is_velocity(family, params):
    metric = gx.metric_from_config(family, params)
    path = gx.trace_geodesic(metric, gx.boundary_tangent(metric, 1.2, 1.2 + math.pi - 0.3), step=5e-3)
    w = gx.parallel_transport(metric, path, path.v[0])
    assert np.max(np.abs(w - path.v)) <= 1e-8


def test_transport_preserves_orthogonality(conformal10):
    path = gx.trace_geodesic(conformal10, gx.boundary_tangent(conformal10, 2.0, 2.0 + math.pi + 0.4),
                             step=5e-3)
    w0 = conformal10.rotate90(path.x[0], path.v[0])
    w = gx.parallel_transport(conformal10, path, w0)
    inners = [conformal10.inner(path.x[i], w[i], path.v[i]) for i in range(path.n_samples)]
    norms = [conformal10.norm(path.x[i], w[i]) for i in range(path.n_samples)]
    assert max(abs(v) for v in inners) <= 1e-8
    assert max(abs(n - 1.0) for n in norms) <= 1e-8


# ---------------------------------------------------------------------------
# convexity margin
# ---------------------------------------------------------------------------

def test_convexity_margin_flat_radial(euclidean):
    phi = gx.RadialSquare()
    assert abs(gx.convexity_margin(euclidean, phi, 50) - 2.0) <= 1e-9


def test_convexity_margin_linear_function(euclidean):
    class Linear:
        def value(self, x):
            return float(x[0])

        def grad(self, x):
            return np.array([1.0, 0.0])

        def hess(self, x):
            return np.zeros((2, 2))

    assert abs(gx.convexity_margin(euclidean, Linear(), 50)) <= 1e-9


def test_convexity_margin_conformal_vs_fd_oracle(conformal05):
    phi = gx.RadialSquare()
    pts = disk_grid(15)
    margin = gx.convexity_margin(conformal05, phi, pts)
    assert margin > 0.0
    assert abs(margin - fd_covariant_hessian_min(conformal05, phi, pts)) <= 1e-5
