"""Forward transform, offset fan geodesics, and their tangent-plane limits.

The forward value of a geodesic is the weighted line integral of the field:
per clip interval the field is a constant vector, so only the weight matrix
needs quadrature; an endpoint-corrected trapezoid rule on the path samples
is used inside every interval.

The fan family anchors at a boundary point x with inward direction v: the
geodesic through the point at arclength h along v, in the direction of the
parallel-transported normal of v.  As h shrinks, the integral scaled by 1/h
converges to a weighted line integral of the sector fan on the tangent
plane; both sides are implemented here so the convergence can be measured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FanConstructionError, NearParallelSectorError, SceneValidationError
from .geometry import (
    BOUNDARY_TOL,
    DEFAULT_STEP,
    DISK_RADIUS,
    GeodesicPath,
    MetricField,
    UnitTangent,
    flow_with_frame,
    trace_geodesic,
    unit_tangent,
)
from .tiling import PiecewiseConstantField, SectorFan, Tiling, clip_path
from .weights import WeightField

# Inward cone about the normal inside which fan anchors are accepted.
FAN_CONE_HALF_ANGLE = math.radians(30.0) + 1e-9
NEAR_PARALLEL_TOL = 1e-9


@dataclass(frozen=True)
class FanGeodesic:
    """One member of the offset fan family at a boundary anchor."""

    anchor: UnitTangent
    offset: float
    path: GeodesicPath
    transported_normal: np.ndarray


@dataclass(frozen=True)
class TangentLine:
    """The line ``v + t*w`` in the orthonormal tangent plane, w = v rotated +pi/2."""

    direction_angle: float

    def point(self, t: float) -> np.ndarray:
        b = self.direction_angle
        v = np.array([math.cos(b), math.sin(b)])
        w = np.array([-math.sin(b), math.cos(b)])
        return v + t * w


# ---------------------------------------------------------------------------
# forward transform
# ---------------------------------------------------------------------------

def per_triangle_weight_integrals(metric: MetricField, weight: WeightField,
                                  tiling: Tiling, path: GeodesicPath, clip=None):
    """Weight matrix integrals of the path pieces inside each triangle.

    Returns ``{triangle_id: (matrix, length)}`` where ``matrix`` is the
    ``(m, k)`` integral of the weight over the pieces inside that triangle
    and ``length`` their total arclength.
    """
    tiling.require_valid()
    if clip is None:
        clip = clip_path(tiling, path)
    pw = weight.along_path(path)
    out = {}
    for interval in clip:
        if interval.triangle is None or interval.length <= 0:
            continue
        mat = _interval_weight_integral(pw, path, interval.t0, interval.t1)
        if interval.triangle in out:
            prev_mat, prev_len = out[interval.triangle]
            out[interval.triangle] = (prev_mat + mat, prev_len + interval.length)
        else:
            out[interval.triangle] = (mat, interval.length)
    return out


def _interval_weight_integral(pw, path: GeodesicPath, t0: float, t1: float) -> np.ndarray:
    eps = 1e-13 * max(1.0, path.tau)
    i0 = int(np.searchsorted(path.t, t0 + eps, side="left"))
    i1 = int(np.searchsorted(path.t, t1 - eps, side="right"))
    nodes = [t0] + [float(t) for t in path.t[i0:i1]] + [t1]
    values = [pw.at_time(t0)]
    values += [pw.at_samples[i] for i in range(i0, i1)]
    values.append(pw.at_time(t1))
    total = np.zeros((pw.weight.m, pw.weight.k), dtype=complex)
    for j in range(len(nodes) - 1):
        dt = nodes[j + 1] - nodes[j]
        if dt > 0:
            total += 0.5 * dt * (values[j] + values[j + 1])
    return total


def forward(metric: MetricField, weight: WeightField, tiling: Tiling,
            field: PiecewiseConstantField, path: GeodesicPath, clip=None) -> np.ndarray:
    """Weighted integral of the field along one maximal geodesic, in C^m.

    Raises SceneValidationError when the tiling fails validation or the
    weight and field column dimensions disagree.
    """
    if weight.k != field.k:
        raise SceneValidationError(
            f"dimension mismatch: weight takes C^{weight.k}, field values lie in C^{field.k}"
        )
    integrals = per_triangle_weight_integrals(metric, weight, tiling, path, clip=clip)
    total = np.zeros(weight.m, dtype=complex)
    for tri, (mat, _length) in integrals.items():
        total += mat @ field.values[tri]
    return total


# ---------------------------------------------------------------------------
# fan geodesics
# ---------------------------------------------------------------------------

def fan_geodesic(metric: MetricField, x, v, h: float, sign: int = 1,
                 step: float = DEFAULT_STEP) -> FanGeodesic:
    """Build the offset geodesic at arclength h along the anchor direction.

    ``x`` must be a boundary point and ``v`` an inward unit direction within
    30 degrees of the inward normal.  The normal of ``v`` (rotated by
    ``sign * pi/2``) is parallel-transported to distance h, and the maximal
    geodesic through that point in the transported direction is traced.
    """
    x = np.asarray(x, dtype=float)
    if abs(math.hypot(x[0], x[1]) - DISK_RADIUS) > BOUNDARY_TOL:
        raise SceneValidationError("fan anchor must sit on the boundary circle")
    anchor = unit_tangent(metric, x, v)
    nu = metric.unit(x, -x)
    cosang = metric.inner(x, anchor.v, nu)
    if cosang < math.cos(FAN_CONE_HALF_ANGLE):
        raise SceneValidationError(
            "fan anchor direction lies outside the 30-degree cone about the inward normal"
        )
    if h <= 0:
        raise SceneValidationError("fan offset h must be positive")
    w0 = metric.rotate90(x, anchor.v, sign=sign)
    p, v_h, w_h = flow_with_frame(metric, anchor, w0, h, step=step)
    if math.hypot(p[0], p[1]) > DISK_RADIUS - 1e-12:
        raise FanConstructionError(f"offset point for h={h:g} is not interior")
    ortho = metric.inner(p, w_h, v_h)
    if abs(ortho) > 1e-8:
        raise FanConstructionError(
            f"transported normal lost orthogonality ({ortho:.2e}); decrease the step"
        )
    start = unit_tangent(metric, p, w_h)
    path = trace_geodesic(metric, start, step=step)
    return FanGeodesic(anchor=anchor, offset=h, path=path, transported_normal=np.asarray(w_h))


def scaled_fan_integral(metric: MetricField, weight: WeightField, tiling: Tiling,
                        field: PiecewiseConstantField, x, v, h: float,
                        sign: int = 1, step: float = DEFAULT_STEP) -> np.ndarray:
    """Forward value of the offset geodesic divided by the offset h."""
    fan = fan_geodesic(metric, x, v, h, sign=sign, step=step)
    return forward(metric, weight, tiling, field, fan.path) / h


# ---------------------------------------------------------------------------
# tangent-plane line integrals
# ---------------------------------------------------------------------------

def sector_chord_lengths(sector_angles, beta: float) -> np.ndarray:
    """Chord length of the line at direction angle beta through each sector.

    The line ``v + t*w`` (v at angle beta, w at beta + pi/2) meets the
    direction at angle ``beta + arctan(t)``; a sector ``[a, b]`` therefore
    contributes ``tan(min(b, cut) - beta) - tan(max(a, -cut) - beta)`` with
    the cuts at ``beta +- pi/2``.  Raises NearParallelSectorError when a
    sector edge is within 1e-9 of a cut.
    """
    half_pi = 0.5 * math.pi
    out = np.zeros(len(sector_angles))
    for i, (a, b) in enumerate(sector_angles):
        width = b - a
        if not (0.0 < width < math.pi):
            raise SceneValidationError(f"sector {i} has invalid width {width:g}")
        s = _wrap_angle(a - beta)
        e = s + width
        # the chord is unbounded if a cut direction touches the sector at all
        for cut in (-half_pi, half_pi, 3.0 * half_pi):
            if s - NEAR_PARALLEL_TOL <= cut <= e + NEAR_PARALLEL_TOL:
                raise NearParallelSectorError(
                    f"sector {i} touches the line direction at relative angle "
                    f"{cut:.6g}; its chord is unbounded"
                )
        pieces = [(s, min(e, math.pi))]
        if e > math.pi:
            pieces.append((-math.pi, e - 2.0 * math.pi))
        total = 0.0
        for lo, hi in pieces:
            lo_c = max(lo, -half_pi)
            hi_c = min(hi, half_pi)
            if hi_c > lo_c:
                total += math.tan(hi_c) - math.tan(lo_c)
        out[i] = total
    return out


def _wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0:
        a += 2.0 * math.pi
    return a - math.pi


def tangent_line_integral(fan: SectorFan, beta: float) -> np.ndarray:
    """Integral of the fan's piecewise constant tangent function over the line.

    ``beta`` is the direction angle (in the fan's orthonormal frame) of the
    unit vector the line passes through at distance one from the vertex.
    """
    if not fan.sectors:
        return np.zeros(fan.k, dtype=complex)
    lengths = sector_chord_lengths([(s.start, s.end) for s in fan.sectors], beta)
    total = np.zeros(fan.k, dtype=complex)
    for s, ell in zip(fan.sectors, lengths):
        total += ell * s.value
    return total


def frozen_limit(weight: WeightField, x, v, fan: SectorFan) -> np.ndarray:
    """Limit value of the scaled fan integrals: weight frozen at the anchor.

    Equals ``W(x, v_perp)`` applied to the tangent-plane line integral, with
    ``v_perp`` the +pi/2 rotation of v in the fan's orthonormal frame.
    """
    v = np.asarray(v, dtype=float)
    beta = fan.angle_of(v)
    u = fan.frame @ v
    u_perp = np.array([-u[1], u[0]])
    v_perp = np.linalg.solve(fan.frame, u_perp)
    w_mat = weight.at(np.asarray(x, dtype=float), v_perp)
    return w_mat @ tangent_line_integral(fan, beta)


# ---------------------------------------------------------------------------
# convergence scans
# ---------------------------------------------------------------------------

def limit_scan(metric: MetricField, weight: WeightField, tiling: Tiling,
               field: PiecewiseConstantField, anchor_angle: float,
               v_offsets, h_values, sign: int = 1, step: float = DEFAULT_STEP):
    """Compare scaled fan integrals against the frozen limit over (v, h) grids.

    The anchor is the boundary point at ``anchor_angle``; it must coincide
    with a tiling vertex, whose sector fan supplies the limit side.
    ``v_offsets`` are angles (radians) added to the inward normal direction.
    Returns a list of row dicts ``{h, v_angle, err, scaled, frozen}``.
    """
    from .tiling import tangent_fan

    x = np.array([math.cos(anchor_angle), math.sin(anchor_angle)])
    vertex_id = tiling.find_vertex(x)
    fan = tangent_fan(tiling, field, vertex_id, metric)
    rows = []
    for offset in v_offsets:
        v = _rotate_chart(metric, x, -x, offset)
        ut = unit_tangent(metric, x, v)
        frozen = frozen_limit(weight, x, ut.v, fan)
        for h in h_values:
            scaled = scaled_fan_integral(metric, weight, tiling, field, x, ut.v, h,
                                         sign=sign, step=step)
            rows.append({
                "h": float(h),
                "v_angle": fan.angle_of(ut.v),
                "err": float(np.linalg.norm(scaled - frozen)),
                "scaled": scaled,
                "frozen": frozen,
            })
    return rows


def _rotate_chart(metric: MetricField, x, v, angle: float) -> np.ndarray:
    """Rotate v by ``angle`` in the g-orthonormal frame at x (chart output)."""
    a = metric.frame(np.asarray(x, dtype=float))
    u = a @ np.asarray(v, dtype=float)
    c, s = math.cos(angle), math.sin(angle)
    u_rot = np.array([c * u[0] - s * u[1], s * u[0] + c * u[1]])
    return np.linalg.solve(a, u_rot)
