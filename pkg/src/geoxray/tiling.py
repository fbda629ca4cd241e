"""Conforming triangulations of the disk, point location, sector fans, clipping.

Triangles are straight in chart coordinates.  The curved disk is covered up
to a boundary band by an inscribed polygon; piecewise constant fields are
zero on that band and on the tiling skeleton (edges and vertices).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SceneValidationError, TangencyWarning
from .geometry import DISK_RADIUS, GeodesicPath, MetricField

BARY_TOL = 1e-12          # skeleton classification tolerance (barycentric)
MIN_AREA = 1e-12
CLIP_BISECT_WIDTH = 1e-14  # edge-crossing bisection width (contract is 1e-10)
TANGENCY_LENGTH = 1e-6


@dataclass(frozen=True)
class Triangle:
    """Vertex-id view of one triangle; coordinates live in the parent tiling."""

    vertex_ids: tuple[int, int, int]


@dataclass(frozen=True)
class LocateResult:
    kind: str                 # "triangle" | "skeleton" | "outside"
    triangle: int | None
    depth: int | None         # 0 interior, 1 open edge, 2 vertex


@dataclass
class TilingReport:
    nondegenerate: bool
    inside_disk: bool
    conforming: bool
    disjoint: bool
    coverage_defect: float
    min_angle: float
    messages: list

    @property
    def ok(self) -> bool:
        return self.nondegenerate and self.inside_disk and self.conforming and self.disjoint


class Tiling:
    """Vertices, triangle index rows, and edge adjacency.

    Triangle rows are reoriented counterclockwise at construction.  The
    object is immutable after validation; all queries are pure.
    """

    def __init__(self, vertices, triangles):
        self.vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
        tris = np.asarray(triangles, dtype=int).reshape(-1, 3)
        if tris.size and (tris.min() < 0 or tris.max() >= len(self.vertices)):
            raise SceneValidationError("tiling: triangle index out of range")
        # orient counterclockwise
        tris = tris.copy()
        for i, (a, b, c) in enumerate(tris):
            if _signed_area(self.vertices[a], self.vertices[b], self.vertices[c]) < 0:
                tris[i] = (a, c, b)
        self.triangles = tris
        self._bary_inv = self._precompute_barycentric()
        self.adjacency = self._build_adjacency()
        self._report = None

    # -- construction helpers ------------------------------------------------
    def _precompute_barycentric(self):
        inv = np.zeros((len(self.triangles), 2, 2))
        for i, (a, b, c) in enumerate(self.triangles):
            m = np.column_stack([self.vertices[b] - self.vertices[a],
                                 self.vertices[c] - self.vertices[a]])
            det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
            if abs(det) < MIN_AREA:
                inv[i] = np.nan
            else:
                inv[i] = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det
        return inv

    def _build_adjacency(self):
        adj = {}
        for i, tri in enumerate(self.triangles):
            for k in range(3):
                e = tuple(sorted((int(tri[k]), int(tri[(k + 1) % 3]))))
                adj.setdefault(e, []).append(i)
        return adj

    # -- basic queries ---------------------------------------------------------
    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def triangle(self, i: int) -> Triangle:
        return Triangle(vertex_ids=tuple(int(j) for j in self.triangles[i]))

    def coords(self, i: int) -> np.ndarray:
        return self.vertices[self.triangles[i]]

    def area(self, i: int) -> float:
        a, b, c = self.coords(i)
        return _signed_area(a, b, c)

    def total_area(self) -> float:
        return sum(self.area(i) for i in range(self.n_triangles))

    def incident_triangles(self, vertex_id: int):
        return [i for i, tri in enumerate(self.triangles) if vertex_id in tri]

    def barycentric(self, i: int, p) -> np.ndarray:
        lam12 = self._bary_inv[i] @ (np.asarray(p, dtype=float) - self.vertices[self.triangles[i][0]])
        return np.array([1.0 - lam12[0] - lam12[1], lam12[0], lam12[1]])

    def find_vertex(self, p, tol=1e-9) -> int:
        d = np.hypot(*(self.vertices - np.asarray(p, dtype=float)).T)
        i = int(np.argmin(d)) if len(d) else -1
        if i < 0 or d[i] > tol:
            raise SceneValidationError(f"no tiling vertex within {tol:g} of {np.asarray(p).tolist()}")
        return i

    # -- validation --------------------------------------------------------------
    def validate(self) -> TilingReport:
        if self._report is None:
            self._report = _validate(self)
        return self._report

    def require_valid(self):
        report = self.validate()
        if not report.ok:
            raise SceneValidationError("tiling rejected: " + "; ".join(report.messages))
        return report


def _signed_area(a, b, c) -> float:
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def _validate(tiling: Tiling) -> TilingReport:
    msgs = []
    v = tiling.vertices
    nondeg = True
    min_angle = math.inf
    for i in range(tiling.n_triangles):
        area = tiling.area(i)
        if abs(area) < MIN_AREA:
            nondeg = False
            msgs.append(f"triangle {i} is degenerate (area {area:.3e})")
            continue
        min_angle = min(min_angle, _min_corner_angle(tiling.coords(i)))
    if tiling.n_triangles == 0:
        min_angle = 0.0

    inside = True
    radii = np.hypot(v[:, 0], v[:, 1]) if len(v) else np.zeros(0)
    if len(radii) and radii.max() > DISK_RADIUS + 1e-9:
        inside = False
        msgs.append("vertex outside the closed unit disk")

    conforming = True
    # coincident vertices break the equal-depth requirement
    for i in range(len(v)):
        for j in range(i + 1, len(v)):
            if np.hypot(*(v[i] - v[j])) < 1e-12:
                conforming = False
                msgs.append(f"vertices {i} and {j} coincide")
    # an edge shared by more than two triangles cannot align depths
    for e, tris in tiling.adjacency.items():
        if len(tris) > 2:
            conforming = False
            msgs.append(f"edge {e} shared by {len(tris)} triangles")
    # T-junction: a vertex in the open interior of another triangle's edge
    for vid in range(len(v)):
        p = v[vid]
        for i, tri in enumerate(tiling.triangles):
            if vid in tri:
                continue
            for k in range(3):
                a = v[tri[k]]
                b = v[tri[(k + 1) % 3]]
                if _on_open_segment(p, a, b):
                    conforming = False
                    msgs.append(
                        f"vertex {vid} lies inside an edge of triangle {i}: "
                        "point depths disagree between the two triangles"
                    )

    disjoint = True
    for i in range(tiling.n_triangles):
        for j in range(i + 1, tiling.n_triangles):
            overlap = _convex_overlap_area(tiling.coords(i), tiling.coords(j))
            if overlap > 1e-12:
                disjoint = False
                msgs.append(f"triangles {i} and {j} overlap (area {overlap:.3e})")

    coverage = math.pi * DISK_RADIUS**2 - tiling.total_area()
    return TilingReport(
        nondegenerate=nondeg,
        inside_disk=inside,
        conforming=conforming,
        disjoint=disjoint,
        coverage_defect=coverage,
        min_angle=min_angle,
        messages=msgs,
    )


def _min_corner_angle(coords) -> float:
    best = math.inf
    for k in range(3):
        a = coords[(k + 1) % 3] - coords[k]
        b = coords[(k + 2) % 3] - coords[k]
        cosang = np.dot(a, b) / (np.hypot(*a) * np.hypot(*b))
        best = min(best, math.acos(min(1.0, max(-1.0, cosang))))
    return best


def _on_open_segment(p, a, b, tol=1e-12) -> bool:
    ab = b - a
    L2 = ab @ ab
    if L2 == 0:
        return False
    s = (p - a) @ ab / L2
    if s <= tol or s >= 1.0 - tol:
        return False
    closest = a + s * ab
    return np.hypot(*(p - closest)) < tol


def _convex_overlap_area(tri_a, tri_b) -> float:
    """Area of the intersection of two triangles (Sutherland-Hodgman clip)."""
    poly = [np.asarray(p, dtype=float) for p in tri_a]
    for k in range(3):
        a = tri_b[k]
        b = tri_b[(k + 1) % 3]
        edge = b - a
        out = []
        for i in range(len(poly)):
            p = poly[i]
            q = poly[(i + 1) % len(poly)]
            sp = edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0])
            sq = edge[0] * (q[1] - a[1]) - edge[1] * (q[0] - a[0])
            if sp >= 0:
                out.append(p)
            if (sp > 0 > sq) or (sp < 0 < sq):
                t = sp / (sp - sq)
                out.append(p + t * (q - p))
        poly = out
        if not poly:
            return 0.0
    area = 0.0
    for i in range(len(poly)):
        p = poly[i]
        q = poly[(i + 1) % len(poly)]
        area += p[0] * q[1] - p[1] * q[0]
    return abs(area) / 2.0


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def polygon_fan_tiling(sides: int, rotation: float = 0.0) -> Tiling:
    """Fan triangulation of a regular polygon inscribed in the unit circle."""
    if sides < 3:
        raise SceneValidationError("polygon needs at least 3 sides")
    angles = rotation + 2.0 * math.pi * np.arange(sides) / sides
    rim = np.column_stack([np.cos(angles), np.sin(angles)])
    vertices = np.vstack([[0.0, 0.0], rim])
    triangles = [(0, 1 + i, 1 + (i + 1) % sides) for i in range(sides)]
    return Tiling(vertices, triangles)


def refine(tiling: Tiling) -> Tiling:
    """Uniform 4-way refinement; edge midpoints are shared, so conformity holds."""
    vertices = [p.copy() for p in tiling.vertices]
    midpoint_id = {}

    def mid(a, b):
        key = (min(a, b), max(a, b))
        if key not in midpoint_id:
            midpoint_id[key] = len(vertices)
            vertices.append(0.5 * (tiling.vertices[a] + tiling.vertices[b]))
        return midpoint_id[key]

    triangles = []
    for a, b, c in tiling.triangles:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        triangles += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    return Tiling(np.array(vertices), triangles)


# ---------------------------------------------------------------------------
# piecewise constant fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PiecewiseConstantField:
    """Per-triangle constant values in C^k; zero on the skeleton and outside."""

    values: np.ndarray        # (n_triangles, k) complex
    k: int

    @staticmethod
    def from_values(values, k=None) -> "PiecewiseConstantField":
        arr = np.atleast_2d(np.asarray(values, dtype=complex))
        if k is not None and arr.shape[1] != k:
            raise SceneValidationError(f"field values have {arr.shape[1]} components, expected {k}")
        return PiecewiseConstantField(values=arr, k=arr.shape[1])

    @staticmethod
    def zero(n_triangles: int, k: int) -> "PiecewiseConstantField":
        return PiecewiseConstantField(values=np.zeros((n_triangles, k), dtype=complex), k=k)

    @staticmethod
    def random(n_triangles: int, k: int, rng, real=False, scale=1.0) -> "PiecewiseConstantField":
        re = rng.uniform(-scale, scale, size=(n_triangles, k))
        im = np.zeros((n_triangles, k)) if real else rng.uniform(-scale, scale, size=(n_triangles, k))
        return PiecewiseConstantField(values=re + 1j * im, k=k)

    def value_at(self, tiling: Tiling, x) -> np.ndarray:
        loc = locate(tiling, x)
        if loc.kind == "triangle":
            return self.values[loc.triangle].copy()
        return np.zeros(self.k, dtype=complex)


# ---------------------------------------------------------------------------
# point location
# ---------------------------------------------------------------------------

def locate(tiling: Tiling, x) -> LocateResult:
    """Classify a chart point against the tiling.

    Depth 0 is an open triangle interior, 1 an open edge, 2 a vertex;
    classification happens at barycentric tolerance 1e-12, edges winning
    over interiors inside that band.
    """
    p = np.asarray(x, dtype=float)
    best_skeleton = None
    for i in range(tiling.n_triangles):
        lam = tiling.barycentric(i, p)
        if np.min(lam) >= -BARY_TOL:
            zeros = int(np.sum(np.abs(lam) <= BARY_TOL))
            if zeros == 0:
                return LocateResult(kind="triangle", triangle=i, depth=0)
            depth = min(zeros, 2)
            if best_skeleton is None or depth > best_skeleton.depth:
                best_skeleton = LocateResult(kind="skeleton", triangle=None, depth=depth)
    if best_skeleton is not None:
        return best_skeleton
    return LocateResult(kind="outside", triangle=None, depth=None)


# ---------------------------------------------------------------------------
# sector fans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sector:
    start: float              # angle in the g-orthonormal frame at the vertex
    end: float                # start < end <= start + pi
    value: np.ndarray         # (k,) complex

    @property
    def width(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class SectorFan:
    """Angular sectors of triangle cones at a vertex, with their field values.

    Angles are measured in a g-orthonormal frame at the vertex; the frame
    matrix is kept so directions can be expressed consistently later.  Gaps
    between sectors carry the value zero.
    """

    vertex: np.ndarray
    sectors: tuple
    frame: np.ndarray
    k: int

    def total_width(self) -> float:
        return sum(s.width for s in self.sectors)

    def angle_of(self, direction) -> float:
        u = self.frame @ np.asarray(direction, dtype=float)
        return math.atan2(u[1], u[0])


def tangent_fan(tiling: Tiling, field: PiecewiseConstantField, vertex_id: int,
                metric: MetricField) -> SectorFan:
    """Sector fan of the triangles incident to a vertex.

    Each incident triangle contributes one sector spanning its two edge
    directions at the vertex, measured in the g-orthonormal frame; the
    sector carries the triangle's field value.
    """
    p = tiling.vertices[vertex_id]
    frame = metric.frame(p)
    sectors = []
    for i in tiling.incident_triangles(vertex_id):
        ids = list(tiling.triangles[i])
        pos = ids.index(vertex_id)
        q = tiling.vertices[ids[(pos + 1) % 3]]
        r = tiling.vertices[ids[(pos + 2) % 3]]
        u1 = frame @ (q - p)
        u2 = frame @ (r - p)
        cross = u1[0] * u2[1] - u1[1] * u2[0]
        dot = u1 @ u2
        width = math.atan2(cross, dot)
        if not (0.0 < width < math.pi):
            raise SceneValidationError(f"degenerate cone at vertex {vertex_id}, triangle {i}")
        start = math.atan2(u1[1], u1[0]) % (2.0 * math.pi)
        sectors.append(Sector(start=start, end=start + width, value=field.values[i].copy()))
    sectors.sort(key=lambda s: s.start)
    for a, b in zip(sectors, sectors[1:]):
        if b.start < a.end - 1e-10:
            raise SceneValidationError(f"overlapping sectors at vertex {vertex_id}")
    if len(sectors) > 1 and sectors[0].start + 2.0 * math.pi < sectors[-1].end - 1e-10:
        raise SceneValidationError(f"overlapping sectors at vertex {vertex_id} (wraparound)")
    fan = SectorFan(vertex=p.copy(), sectors=tuple(sectors), frame=frame, k=field.k)
    if fan.total_width() > 2.0 * math.pi + 1e-9:
        raise SceneValidationError(f"sector widths exceed a full turn at vertex {vertex_id}")
    return fan


# ---------------------------------------------------------------------------
# geodesic clipping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClipInterval:
    triangle: int | None      # None: skeleton or outside every triangle
    t0: float
    t1: float

    @property
    def length(self) -> float:
        return self.t1 - self.t0


def clip_path(tiling: Tiling, path: GeodesicPath) -> list:
    """Partition the path parameter range by the triangle containing each piece.

    Edge-line crossings are bracketed on the sample grid and refined by
    bisection on the signed edge-line function; sub-intervals are classified
    by locating their midpoints.  Pieces on the skeleton or outside all
    triangles get ``triangle=None``.  A skeleton piece longer than 1e-6
    raises a TangencyWarning (its field contribution is zero either way).
    """
    tau = path.tau
    if tau <= 0 or tiling.n_triangles == 0:
        return [ClipInterval(triangle=None, t0=0.0, t1=tau)] if tau > 0 else []
    cuts = {0.0, tau}
    X = path.x
    for (ia, ib), _tris in tiling.adjacency.items():
        a = tiling.vertices[ia]
        b = tiling.vertices[ib]
        ex, ey = b[0] - a[0], b[1] - a[1]
        s = ex * (X[:, 1] - a[1]) - ey * (X[:, 0] - a[0])
        sign_change = np.nonzero(s[:-1] * s[1:] < 0.0)[0]
        for i in sign_change:
            cuts.add(_bisect_line_crossing(path, a, (ex, ey), path.t[i], path.t[i + 1]))
        for i in np.nonzero(s == 0.0)[0]:
            cuts.add(float(path.t[i]))
    ordered = _dedupe(sorted(cuts))
    raw = []
    for t0, t1 in zip(ordered, ordered[1:]):
        loc = locate(tiling, path.position(0.5 * (t0 + t1)))
        raw.append((loc.triangle, loc.kind, t0, t1))
    merged = _merge_adjacent(raw)
    out = []
    for triangle, kind, t0, t1 in merged:
        if kind == "skeleton" and t1 - t0 > TANGENCY_LENGTH:
            warnings.warn(
                f"geodesic runs along the tiling skeleton for length {t1 - t0:.3g}",
                TangencyWarning,
            )
        out.append(ClipInterval(triangle=triangle, t0=t0, t1=t1))
    return out


def _bisect_line_crossing(path, a, e, lo, hi) -> float:
    ex, ey = e

    def f(t):
        p = path.position(t)
        return ex * (p[1] - a[1]) - ey * (p[0] - a[0])

    flo = f(lo)
    while hi - lo > CLIP_BISECT_WIDTH:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (flo < 0) == (fm < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _dedupe(ts, tol=1e-11):
    out = [ts[0]]
    for t in ts[1:]:
        if t - out[-1] > tol:
            out.append(t)
    return out


def _merge_adjacent(raw):
    out = []
    for triangle, kind, t0, t1 in raw:
        if out and out[-1][0] == triangle and out[-1][1] == kind:
            out[-1] = (triangle, kind, out[-1][2], t1)
        else:
            out.append((triangle, kind, t0, t1))
    return out
