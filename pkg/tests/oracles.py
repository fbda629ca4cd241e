"""Independent oracles used by the tests.

Everything here derives expected values by a different route than the
library code under test: half-plane interval clipping instead of bisection
on sampled sign functions, central finite differences instead of closed-form
derivatives, plain quadrature instead of tangent differences.
"""

import math

import numpy as np


def segment_triangle_interval(p0, d, coords):
    """Parameter interval of the line ``p0 + t*d`` inside a triangle.

    Liang-Barsky style: intersect the three half-plane constraints of the
    counterclockwise triangle.  Returns ``(t_in, t_out)`` with
    ``t_out <= t_in`` when the line misses the triangle.
    """
    p0 = np.asarray(p0, dtype=float)
    d = np.asarray(d, dtype=float)
    t_lo, t_hi = -math.inf, math.inf
    for k in range(3):
        a = coords[k]
        b = coords[(k + 1) % 3]
        ex, ey = b[0] - a[0], b[1] - a[1]
        # inside: cross(edge, x - a) >= 0 for CCW triangles
        c0 = ex * (p0[1] - a[1]) - ey * (p0[0] - a[0])
        c1 = ex * d[1] - ey * d[0]
        if abs(c1) < 1e-15:
            if c0 < 0:
                return (0.0, 0.0)
            continue
        t_cross = -c0 / c1
        if c1 > 0:
            t_lo = max(t_lo, t_cross)
        else:
            t_hi = min(t_hi, t_cross)
    return (t_lo, t_hi)


def chord_triangle_length(p0, d, coords):
    t_lo, t_hi = segment_triangle_interval(p0, d, coords)
    return max(0.0, t_hi - t_lo)


def chord_forward_value(p0, d, tiling, values):
    """Unweighted straight-chord transform: sum of value * intersection length."""
    total = np.zeros(values.shape[1], dtype=complex)
    for i in range(tiling.n_triangles):
        total += chord_triangle_length(p0, d, tiling.coords(i)) * values[i]
    return total


def fd_metric_derivative(metric, x, eps=1e-6):
    """Central finite differences of the metric matrix: ``dg[l, i, j] = d_l g_ij``."""
    x = np.asarray(x, dtype=float)
    dg = np.zeros((2, 2, 2))
    for l in range(2):
        e = np.zeros(2)
        e[l] = eps
        dg[l] = (metric.matrix(x + e) - metric.matrix(x - e)) / (2 * eps)
    return dg


def fd_christoffel(metric, x, eps=1e-6):
    """Levi-Civita coefficients from finite differences of the metric."""
    g = metric.matrix(np.asarray(x, dtype=float))
    g_inv = np.linalg.inv(g)
    dg = fd_metric_derivative(metric, x, eps)
    gamma = np.zeros((2, 2, 2))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                s = 0.0
                for l in range(2):
                    s += g_inv[i, l] * (dg[j, l, k] + dg[k, j, l] - dg[l, j, k])
                gamma[i, j, k] = 0.5 * s
    return gamma


def fd_covariant_hessian_min(metric, phi, points, eps=1e-5):
    """Min eigenvalue of the covariant Hessian, everything finite-differenced."""
    out = math.inf
    for p in points:
        grad = np.zeros(2)
        hess = np.zeros((2, 2))
        for i in range(2):
            ei = np.zeros(2)
            ei[i] = eps
            grad[i] = (phi.value(p + ei) - phi.value(p - ei)) / (2 * eps)
            hess[i, i] = (phi.value(p + ei) - 2 * phi.value(p) + phi.value(p - ei)) / eps**2
        e0 = np.array([eps, 0.0])
        e1 = np.array([0.0, eps])
        hess[0, 1] = hess[1, 0] = (
            phi.value(p + e0 + e1) - phi.value(p + e0 - e1)
            - phi.value(p - e0 + e1) + phi.value(p - e0 - e1)
        ) / (4 * eps**2)
        gamma = fd_christoffel(metric, p)
        cov = hess - np.einsum("kij,k->ij", gamma, grad)
        out = min(out, float(np.linalg.eigvalsh(cov)[0]))
    return out


def quadrature_sector_length(start, end, beta, n=200001):
    """Chord length of a sector by Simpson quadrature in the angle variable.

    Parametrizing the line by the direction angle theta of its points gives
    arclength density ``sec^2(theta - beta)``; integrate it over the sector
    clipped to the open half-plane of directions.
    """
    def wrap(a):
        a = math.fmod(a - beta + math.pi, 2 * math.pi)
        if a <= 0:
            a += 2 * math.pi
        return a - math.pi

    width = end - start
    s = wrap(start)
    pieces = [(s, min(s + width, math.pi))]
    if s + width > math.pi:
        pieces.append((-math.pi, s + width - 2 * math.pi))
    total = 0.0
    for lo, hi in pieces:
        lo = max(lo, -math.pi / 2 + 1e-12)
        hi = min(hi, math.pi / 2 - 1e-12)
        if hi <= lo:
            continue
        xs = np.linspace(lo, hi, n)
        ys = 1.0 / np.cos(xs) ** 2
        total += float(np.trapezoid(ys, xs))
    return total


def observed_order(values):
    """Convergence order from three values at steps h, h/2, h/4."""
    d1 = abs(values[0] - values[1])
    d2 = abs(values[1] - values[2])
    if d2 == 0:
        return math.inf
    return math.log2(d1 / d2)
