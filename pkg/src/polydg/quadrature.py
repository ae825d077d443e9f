"""Quadrature rules and exact monomial integration over polygons.

Two integration routes coexist on purpose:

* a quadrature-free (QF) route that reduces polygon integrals of bivariate
  monomials to edge integrals via the homogeneous-function/Stokes identity,
  exact to machine precision for polynomial integrands;
* a sub-tessellation (ST) route that splits a polygon into triangles and
  applies a collapsed Gauss rule, usable for arbitrary smooth integrands
  and serving as an independent oracle for the QF route.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .geometry import is_simple_polygon, polygon_centroid, polygon_signed_area

MAX_GAUSS_POINTS = 64


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes/weights pair with a certified polynomial exactness degree."""

    nodes: np.ndarray    # (n,) on [-1,1] for 1D rules, (n, 2) for 2D rules
    weights: np.ndarray  # (n,)
    degree: int          # exact for all polynomials of total degree <= degree

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)


@dataclass(frozen=True)
class MonomialIntegralTable:
    """Integrals I[k, q] = int_P xi^k eta^q dA for 0<=k<=kmax, 0<=q<=qmax."""

    values: np.ndarray
    kmax: int
    qmax: int

    def __post_init__(self):
        self.values.setflags(write=False)


def _legendre_value_derivative(n: int, x: np.ndarray):
    """Standard Legendre P_n and P_n' at the points x (three-term recurrence)."""
    p_prev = np.ones_like(x)
    d_prev = np.zeros_like(x)
    if n == 0:
        return p_prev, d_prev
    p = x.copy()
    d = np.ones_like(x)
    for k in range(1, n):
        p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        d_next = d_prev + (2 * k + 1) * p
        p_prev, p = p, p_next
        d_prev, d = d, d_next
    return p, d


@lru_cache(maxsize=None)
def gauss_legendre_1d(n: int) -> QuadratureRule:
    """Gauss-Legendre rule with n points on [-1,1], exact to degree 2n-1.

    Nodes are found by Newton iteration on P_n started from the Chebyshev
    approximations; the rule is symmetrized so that mirrored nodes and
    weights match bit for bit.
    """
    if not 1 <= n <= MAX_GAUSS_POINTS:
        raise ValueError(f"gauss_legendre_1d: n={n} outside [1, {MAX_GAUSS_POINTS}]")
    k = np.arange(n)
    x = np.cos(np.pi * (4 * k + 3) / (4 * n + 2))
    for _ in range(100):
        p, dp = _legendre_value_derivative(n, x)
        step = p / dp
        x -= step
        if np.max(np.abs(step)) < 1e-15:
            break
    _, dp = _legendre_value_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return QuadratureRule(nodes=x, weights=w, degree=2 * n - 1)


@lru_cache(maxsize=None)
def triangle_rule(ell: int) -> QuadratureRule:
    """Collapsed (Duffy) rule with (ell+1)^2 points on the reference triangle.

    The reference triangle is (0,0),(1,0),(0,1).  A tensor product of
    Gauss-Legendre in the first direction and Gauss-Jacobi(1,0) in the
    second is mapped through the collapsing transformation, giving
    exactness for total degree <= 2*ell+1; the weights sum to 1/2.
    """
    if ell < 0:
        raise ValueError("triangle_rule: degree parameter must be >= 0")
    n = ell + 1
    gl = gauss_legendre_1d(n)
    gj_x, gj_w = roots_jacobi(n, 1.0, 0.0)
    xi = gl.nodes[:, None]
    eta = gj_x[None, :]
    x = (1.0 + xi) * (1.0 - eta) / 4.0
    y = np.broadcast_to((1.0 + eta) / 2.0, x.shape)
    w = gl.weights[:, None] * gj_w[None, :] / 8.0
    nodes = np.column_stack([x.ravel(), y.ravel()])
    return QuadratureRule(nodes=nodes, weights=w.ravel(), degree=2 * ell + 1)


def map_rule_to_triangle(rule: QuadratureRule, tri: np.ndarray):
    """Push a reference-triangle rule to a physical triangle.

    Returns (points (n,2), weights (n,)); weights carry the affine Jacobian.
    """
    tri = np.asarray(tri, dtype=float)
    v0, v1, v2 = tri
    jac = (v1[0] - v0[0]) * (v2[1] - v0[1]) - (v1[1] - v0[1]) * (v2[0] - v0[0])
    pts = v0 + np.outer(rule.nodes[:, 0], v1 - v0) + np.outer(rule.nodes[:, 1], v2 - v0)
    return pts, rule.weights * jac


def subtessellate(polygon: np.ndarray) -> list[np.ndarray]:
    """Split a simple CCW polygon into positively oriented triangles.

    A centroid fan is used when the polygon is star-shaped with respect to
    its own centroid; otherwise the polygon is ear-clipped.  Triangle areas
    sum to the polygon area.
    """
    poly = np.asarray(polygon, dtype=float)
    if len(poly) < 3:
        raise ValueError("subtessellate: polygon needs at least 3 vertices")
    area = polygon_signed_area(poly)
    if area <= 0.0:
        raise ValueError("subtessellate: polygon must be counter-clockwise and non-degenerate")
    if not is_simple_polygon(poly):
        raise ValueError("subtessellate: polygon is self-intersecting")

    c = polygon_centroid(poly)
    fan = [np.array([c, poly[i], poly[(i + 1) % len(poly)]]) for i in range(len(poly))]
    fan_areas = np.array([polygon_signed_area(t) for t in fan])
    if np.all(fan_areas > 1e-12 * area):
        return fan
    return _ear_clip(poly)


def _point_in_triangle(p, a, b, c, eps) -> bool:
    """Inside-or-on-boundary test used to reject blocked ears."""
    d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    d2 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
    d3 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
    return d1 >= -eps and d2 >= -eps and d3 >= -eps


def _ear_clip(poly: np.ndarray) -> list[np.ndarray]:
    n = len(poly)
    scale = float(np.max(np.ptp(poly, axis=0)))
    area_eps = 1e-14 * scale * scale
    idx = list(range(n))
    tris: list[np.ndarray] = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 4 * n * n:
            raise ValueError("ear clipping failed: polygon is not simple")
        clipped = False
        for pos in range(len(idx)):
            ia = idx[pos - 1]
            ib = idx[pos]
            ic = idx[(pos + 1) % len(idx)]
            a, b, c = poly[ia], poly[ib], poly[ic]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cross <= area_eps:
                # Collinear corner: drop the vertex, it spans no area.
                if abs(cross) <= area_eps:
                    other = [j for j in idx if j not in (ia, ib, ic)]
                    on_seg = any(
                        _point_in_triangle(poly[j], a, b, c, area_eps) for j in other
                    )
                    if not on_seg:
                        idx.pop(pos)
                        clipped = True
                        break
                continue
            blocked = any(
                _point_in_triangle(poly[j], a, b, c, -area_eps)
                for j in idx
                if j not in (ia, ib, ic)
            )
            if not blocked:
                tris.append(np.array([a, b, c]))
                idx.pop(pos)
                clipped = True
                break
        if not clipped:
            raise ValueError("ear clipping failed: polygon is not simple")
    a, b, c = (poly[i] for i in idx)
    cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if cross > area_eps:
        tris.append(np.array([a, b, c]))
    return tris


def monomial_polygon_integrals(polygon: np.ndarray, kmax: int, qmax: int) -> MonomialIntegralTable:
    """Exact integrals of xi^k eta^q over a simple polygon, quadrature-free.

    Uses the homogeneity/Stokes reduction: for the degree-(k+q) homogeneous
    monomial, int_P xi^k eta^q dA = (2+k+q)^-1 * sum_e (x_e . n_e) *
    int_e xi^k eta^q ds, where x_e is any point on the line of edge e and
    n_e its outward unit normal.  Edge integrals are evaluated with a
    Gauss-Legendre rule sized for the largest requested degree, so every
    table entry is exact to round-off.  No 2D sub-tessellation is built.

    The polygon is expected in bounding-box reference coordinates (inside
    [-1,1]^2) with the homogeneity origin at the bbox center.
    """
    poly = np.asarray(polygon, dtype=float)
    if len(poly) < 3:
        raise ValueError("monomial_polygon_integrals: polygon needs >= 3 vertices")
    if polygon_signed_area(poly) <= 0.0:
        raise ValueError("monomial_polygon_integrals: polygon must be CCW")
    if not is_simple_polygon(poly):
        raise ValueError("monomial_polygon_integrals: polygon is self-intersecting")

    a = poly
    b = np.roll(poly, -1, axis=0)
    edge = b - a
    lengths = np.hypot(edge[:, 0], edge[:, 1])
    keep = lengths > 0.0
    a, b, edge, lengths = a[keep], b[keep], edge[keep], lengths[keep]

    normals = np.column_stack([edge[:, 1], -edge[:, 0]]) / lengths[:, None]
    dist = np.sum(a * normals, axis=1)  # x_e . n_e, constant along each edge

    n_gauss = (kmax + qmax + 2 + 1) // 2
    rule = gauss_legendre_1d(min(n_gauss, MAX_GAUSS_POINTS))
    t = rule.nodes
    pts_x = a[:, 0:1] + 0.5 * (t + 1.0)[None, :] * edge[:, 0:1]
    pts_y = a[:, 1:2] + 0.5 * (t + 1.0)[None, :] * edge[:, 1:2]

    powers_x = pts_x[:, :, None] ** np.arange(kmax + 1)[None, None, :]
    powers_y = pts_y[:, :, None] ** np.arange(qmax + 1)[None, None, :]
    w = dist[:, None] * rule.weights[None, :] * (lengths / 2.0)[:, None]
    raw = np.einsum("eg,egk,egq->kq", w, powers_x, powers_y)

    k = np.arange(kmax + 1)[:, None]
    q = np.arange(qmax + 1)[None, :]
    return MonomialIntegralTable(values=raw / (2.0 + k + q), kmax=kmax, qmax=qmax)
