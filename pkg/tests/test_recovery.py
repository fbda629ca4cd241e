import math

import numpy as np
import pytest

import geoxray as gx
from geoxray.recovery import batch_descriptors, chord_descriptor, triangle_level
from geoxray.transform import sector_chord_lengths
from geoxray.weights import sphere_bundle_samples

from conftest import chord_start

INJECTIVE_32 = np.array([[1.0, 0.2], [0.1, 1.0], [0.4, 0.6]], dtype=complex)
SMALL_PLAN = gx.ChordPlan(rotations=18, levels_per_batch=3)


# ---------------------------------------------------------------------------
# local sector-value recovery
# ---------------------------------------------------------------------------

def synthetic_limit_samples(weight_matrix, sector_angles, truth, betas):
    samples = []
    for b in betas:
        ell = sector_chord_lengths(sector_angles, b)
        total = sum(ell[i] * truth[i] for i in range(len(sector_angles)))
        samples.append((b, weight_matrix @ total))
    return samples


def test_recover_single_sector_exact():
    angles = [(math.pi - 0.2, math.pi + 0.2)]
    truth = np.array([[0.8 - 0.3j]])
    samples = synthetic_limit_samples(np.eye(1, dtype=complex), angles, truth,
                                      [math.pi - 0.3, math.pi, math.pi + 0.25])
    values, residual, cond = gx.recover_fan_values(lambda a: np.eye(1, dtype=complex),
                                                   angles, samples)
    assert np.max(np.abs(values - truth)) <= 1e-12
    assert residual <= 1e-12


def test_recover_three_sectors_roundtrip():
    rng = np.random.default_rng(42)
    center = math.pi
    width = math.radians(20)
    angles = [(center - 1.5 * width + i * width, center - 0.5 * width + i * width)
              for i in range(3)]
    truth = rng.uniform(-1, 1, (3, 2)) + 1j * rng.uniform(-1, 1, (3, 2))
    samples = synthetic_limit_samples(INJECTIVE_32, angles, truth,
                                      [center + math.radians(d) for d in np.linspace(-25, 25, 9)])
    values, residual, cond = gx.recover_fan_values(lambda a: INJECTIVE_32, angles, samples)
    assert np.max(np.abs(values - truth)) <= 1e-10
    assert cond < 1e4


def test_recover_rank_deficient_weight_raises():
    angles = [(math.pi - 0.3, math.pi), (math.pi, math.pi + 0.3)]
    bad = np.array([[1.0, 0.0], [1.0, 0.0]], dtype=complex)
    samples = synthetic_limit_samples(bad, angles, np.zeros((2, 2)),
                                      [math.pi - 0.2, math.pi + 0.1, math.pi + 0.3])
    with pytest.raises(gx.NonInjectiveWeightError):
        gx.recover_fan_values(lambda a: bad, angles, samples)


def test_recover_underdetermined_sampling_raises():
    angles = [(math.pi - 0.3, math.pi), (math.pi, math.pi + 0.3)]
    samples = synthetic_limit_samples(np.eye(1, dtype=complex)[:, :1], angles,
                                      np.zeros((2, 1)), [math.pi])
    with pytest.raises(gx.IllPosedSamplingError):
        gx.recover_fan_values(lambda a: np.eye(1, dtype=complex), angles, samples)


def test_recover_condition_cap_enforced():
    angles = [(math.pi - 0.3, math.pi), (math.pi, math.pi + 0.3)]
    samples = synthetic_limit_samples(np.eye(1, dtype=complex), angles,
                                      np.array([[1.0], [2.0]]),
                                      [math.pi - 0.2, math.pi + 0.1, math.pi + 0.2])
    with pytest.raises(gx.IllPosedSamplingError):
        gx.recover_fan_values(lambda a: np.eye(1, dtype=complex), angles, samples,
                              cond_cap=1.0000001)


# ---------------------------------------------------------------------------
# frontier ordering
# ---------------------------------------------------------------------------

def test_frontier_hexagon_fan():
    tiling = gx.polygon_fan_tiling(6)
    phi = gx.RadialSquare()
    batches = gx.order_frontier(tiling, phi)
    # every fan triangle touches the rim: one batch with all six
    assert len(batches) == 1 and sorted(batches[0]) == list(range(6))


def test_frontier_single_triangle():
    t = gx.Tiling([[0.9, 0], [-0.3, 0.4], [-0.3, -0.5]], [[0, 1, 2]])
    assert gx.order_frontier(t, gx.RadialSquare()) == [[0]]


def test_frontier_refined_hexagon_batches(hexagon24):
    phi = gx.RadialSquare()
    batches = gx.order_frontier(hexagon24, phi)
    sizes = [len(b) for b in batches]
    levels = [triangle_level(hexagon24, phi, b[0]) for b in batches]
    assert sizes == [12, 6, 6]
    assert np.allclose(levels, [1.0, 0.75, 0.25])


def test_frontier_containment_predicate(hexagon24):
    # brute force: a triangle strictly inside another's min-radius disk comes later
    phi = gx.RadialSquare()
    batches = gx.order_frontier(hexagon24, phi)
    position = {}
    for rank, batch in enumerate(batches):
        for tri in batch:
            position[tri] = rank
    for i in range(hexagon24.n_triangles):
        ri_max = max(np.hypot(*p) for p in hexagon24.coords(i))
        for j in range(hexagon24.n_triangles):
            rj_min = min(np.hypot(*p) for p in hexagon24.coords(j))
            if ri_max < rj_min - 1e-12:
                assert position[i] >= position[j]


# ---------------------------------------------------------------------------
# chord planning
# ---------------------------------------------------------------------------

def test_chord_descriptor_geometry():
    desc = chord_descriptor(np.zeros(2), 0.5, 1.2)
    assert desc is not None
    ba, da = desc
    p = np.array([math.cos(ba), math.sin(ba)])
    d = np.array([math.cos(da), math.sin(da)])
    # distance of the chord line from the origin is the requested radius
    assert abs(abs(p[0] * d[1] - p[1] * d[0]) - 0.5) <= 1e-12


def test_chord_descriptor_missing_disk():
    assert chord_descriptor(np.zeros(2), 1.2, 0.3) is None


def test_batch_descriptors_respect_level_window():
    phi = gx.RadialSquare()
    for ba, da in batch_descriptors(phi, 0.25, 0.75, gx.ChordPlan(rotations=8, levels_per_batch=3)):
        p = np.array([math.cos(ba), math.sin(ba)])
        d = np.array([math.cos(da), math.sin(da)])
        dist = abs(p[0] * d[1] - p[1] * d[0])
        assert 0.25 < dist**2 < 0.75


# ---------------------------------------------------------------------------
# layer stripping
# ---------------------------------------------------------------------------

def test_reconstruct_zero_field(euclidean, hexagon24):
    weight = gx.ConstantWeight(INJECTIVE_32)
    field = gx.PiecewiseConstantField.zero(hexagon24.n_triangles, 2)
    oracle = gx.SyntheticOracle(euclidean, weight, hexagon24, field)
    report = gx.reconstruct(euclidean, weight, hexagon24, oracle, gx.RadialSquare(),
                            plan=SMALL_PLAN)
    assert np.max(np.abs(report.values)) <= 1e-12
    assert np.max(report.per_triangle_residual) <= 1e-12


def test_reconstruct_hexagon_k1_roundtrip(euclidean, hexagon24):
    rng = np.random.default_rng(6)
    weight = gx.IdentityWeight(1)
    field = gx.PiecewiseConstantField.random(hexagon24.n_triangles, 1, rng, real=True)
    oracle = gx.SyntheticOracle(euclidean, weight, hexagon24, field)
    report = gx.reconstruct(euclidean, weight, hexagon24, oracle, gx.RadialSquare(),
                            plan=SMALL_PLAN)
    err = np.max(np.abs(report.values - field.values)) / np.max(np.abs(field.values))
    assert err <= 1e-6
    assert sorted(report.processing_order) == list(range(hexagon24.n_triangles))


def test_reconstruct_overdetermined_channels(euclidean, hexagon24):
    rng = np.random.default_rng(8)
    weight = gx.ConstantWeight(INJECTIVE_32)
    field = gx.PiecewiseConstantField.random(hexagon24.n_triangles, 2, rng)
    oracle = gx.SyntheticOracle(euclidean, weight, hexagon24, field)
    report = gx.reconstruct(euclidean, weight, hexagon24, oracle, gx.RadialSquare(),
                            plan=SMALL_PLAN)
    err = np.max(np.abs(report.values - field.values)) / np.max(np.abs(field.values))
    assert err <= 1e-6


def test_reconstruct_deleted_batch_levels_coverage_error(euclidean, hexagon24):
    # no plan levels inside the middle window (0.25, 0.75): batch 2 starves
    weight = gx.IdentityWeight(1)
    field = gx.PiecewiseConstantField.zero(hexagon24.n_triangles, 1)
    oracle = gx.SyntheticOracle(euclidean, weight, hexagon24, field)
    plan = gx.ChordPlan(rotations=18, levels=(0.8, 0.85, 0.9, 0.95, 0.05, 0.1, 0.15, 0.2))
    with pytest.raises(gx.CoverageError):
        gx.reconstruct(euclidean, weight, hexagon24, oracle, gx.RadialSquare(), plan=plan)


def test_reconstruct_non_injective_weight_raises(euclidean, hexagon24):
    weight = gx.ConstantWeight(np.array([[1, 0], [1, 0], [0, 0]], dtype=complex))
    field = gx.PiecewiseConstantField.zero(hexagon24.n_triangles, 2)
    oracle = gx.SyntheticOracle(euclidean, weight, hexagon24, field)
    with pytest.raises(gx.NonInjectiveWeightError):
        gx.reconstruct(euclidean, weight, hexagon24, oracle, gx.RadialSquare(), plan=SMALL_PLAN)


def test_reconstruct_recorded_oracle_missing_row(euclidean, hexagon24):
    weight = gx.IdentityWeight(1)
    oracle = gx.RecordedOracle({}, 1)
    with pytest.raises(gx.CoverageError):
        gx.reconstruct(euclidean, weight, hexagon24, oracle, gx.RadialSquare(), plan=SMALL_PLAN)


def test_reconstruct_with_noise_diagnostic(euclidean, hexagon24):
    rng = np.random.default_rng(14)
    weight = gx.IdentityWeight(1)
    field = gx.PiecewiseConstantField.random(hexagon24.n_triangles, 1, rng, real=True)
    sigma = 1e-4
    oracle = gx.SyntheticOracle(euclidean, weight, hexagon24, field,
                                noise_sigma=sigma, rng=np.random.default_rng(99))
    report = gx.reconstruct(euclidean, weight, hexagon24, oracle, gx.RadialSquare(),
                            plan=SMALL_PLAN)
    err = np.max(np.abs(report.values - field.values))
    # the solve stays stable: error within a modest factor of the noise floor
    assert 0.0 < err <= 100.0 * sigma
    assert np.max(report.per_triangle_residual) > 0.0


def test_reconstruct_weight_covariance(euclidean, hexagon24):
    rng = np.random.default_rng(12)
    field = gx.PiecewiseConstantField.random(hexagon24.n_triangles, 2, rng)
    b = np.array([[2.0, 0.1, 0.0], [0.0, 1.0, 0.3], [0.2, 0.0, 1.5]], dtype=complex)
    w1 = gx.ConstantWeight(INJECTIVE_32)
    w2 = gx.ConstantWeight(b @ INJECTIVE_32)
    rep1 = gx.reconstruct(euclidean, w1, hexagon24,
                          gx.SyntheticOracle(euclidean, w1, hexagon24, field),
                          gx.RadialSquare(), plan=SMALL_PLAN)
    rep2 = gx.reconstruct(euclidean, w2, hexagon24,
                          gx.SyntheticOracle(euclidean, w2, hexagon24, field),
                          gx.RadialSquare(), plan=SMALL_PLAN)
    assert np.max(np.abs(rep1.values - rep2.values)) <= 1e-8


# ---------------------------------------------------------------------------
# operator assembly and spectrum
# ---------------------------------------------------------------------------

def test_assemble_empty_tiling(euclidean):
    t = gx.Tiling(np.zeros((0, 2)), np.zeros((0, 3), dtype=int))
    path = gx.trace_geodesic(euclidean, chord_start(euclidean, 0.0, 3.0), step=1e-2)
    a = gx.assemble_operator(euclidean, gx.IdentityWeight(1), t, [path])
    assert a.shape == (1, 0)
    assert len(gx.singular_spectrum(a)) == 0
    assert math.isnan(gx.spectral_summary(gx.singular_spectrum(a))[2])


def test_assemble_single_triangle_single_chord(euclidean):
    from oracles import chord_triangle_length

    t = gx.Tiling([[math.cos(a), math.sin(a)] for a in (0.5, 2.4, 4.2)], [[0, 1, 2]])
    path = gx.trace_geodesic(euclidean, chord_start(euclidean, 0.2, 3.4), step=1e-2)
    a = gx.assemble_operator(euclidean, gx.IdentityWeight(1), t, [path])
    assert a.shape == (1, 1)
    expected = chord_triangle_length(path.x[0], path.v[0], t.coords(0))
    assert abs(a[0, 0] - expected) <= 1e-9


def test_spectrum_rank_dichotomy(euclidean, hexagon24):
    from geoxray.scene import grid_chord_descriptors

    descriptors = grid_chord_descriptors(6, 20)
    paths = [gx.trace_geodesic(euclidean, gx.boundary_tangent(euclidean, ba, da), step=1e-2)
             for ba, da in descriptors]
    a_good = gx.assemble_operator(euclidean, gx.ConstantWeight(INJECTIVE_32), hexagon24, paths)
    ratio_good = gx.spectral_summary(gx.singular_spectrum(a_good))[2]
    assert ratio_good > 1e-6
    bad = gx.ConstantWeight(np.array([[1, 0], [1, 0], [0, 0]], dtype=complex))
    a_bad = gx.assemble_operator(euclidean, bad, hexagon24, paths)
    ratio_bad = gx.spectral_summary(gx.singular_spectrum(a_bad))[2]
    assert ratio_bad < 1e-12


def test_margin_sampling_grid_inside_disk(euclidean):
    for ut in sphere_bundle_samples(euclidean, 30, 4):
        assert np.hypot(*ut.x) < 1.0
