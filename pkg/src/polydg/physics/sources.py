"""Source time functions, point sources, and boundary pulses."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..basis import FeSpace
from ..errors import ValidationError
from ..geometry import polygon_signed_area


@dataclass(frozen=True)
class SourceTimeFunction:
    """Scalar time modulation: a named pulse or an arbitrary callable."""

    kind: str                    # "ricker_like" | "gaussian_wavelet" | "analytic"
    func: Callable[[float], float]

    def __call__(self, t):
        return self.func(t)


def ricker_like(delay: float = 0.5) -> SourceTimeFunction:
    """S(t) = (1 - 8 pi^2 (t-delay)^2) exp(-4 pi^2 (t-delay)^2)."""

    def s(t):
        tau = t - delay
        return (1.0 - 8.0 * np.pi ** 2 * tau ** 2) * np.exp(-4.0 * np.pi ** 2 * tau ** 2)

    return SourceTimeFunction("ricker_like", s)


def gaussian_wavelet(peak_frequency: float) -> SourceTimeFunction:
    """g(t) = 2 pi f sqrt(e) (t - 1/f) exp(-2 (pi f)^2 (t - 1/f)^2).

    Unit peak amplitude, extrema at t = 1/f +- 1/(2 pi f).
    """
    if peak_frequency <= 0.0:
        raise ValidationError("peak frequency must be positive")
    f = float(peak_frequency)

    def g(t):
        tau = t - 1.0 / f
        return 2.0 * np.pi * f * np.sqrt(np.e) * tau * np.exp(-2.0 * (np.pi * f) ** 2 * tau ** 2)

    return SourceTimeFunction("gaussian_wavelet", g)


@dataclass(frozen=True)
class DoubleCoupleSpec:
    """Double-couple moment point source: location plus time modulation."""

    location: tuple[float, float]
    time_function: SourceTimeFunction


@dataclass(frozen=True)
class SeparableLoad:
    """Right-hand side of the form F(t) = S(t) * F0."""

    vector: np.ndarray
    time_function: Callable[[float], float]

    def __call__(self, t: float) -> np.ndarray:
        return float(self.time_function(t)) * self.vector


def _point_in_polygon(point, poly, tol):
    """(inside, on_boundary) by crossing count plus edge-distance check."""
    x, y = point
    n = len(poly)
    inside = False
    on_boundary = False
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        ln2 = ex * ex + ey * ey
        t = 0.0 if ln2 == 0.0 else max(0.0, min(1.0, ((x - ax) * ex + (y - ay) * ey) / ln2))
        dx, dy = x - (ax + t * ex), y - (ay + t * ey)
        if dx * dx + dy * dy <= tol * tol:
            on_boundary = True
        if (ay > y) != (by > y):
            x_cross = ax + (y - ay) / (by - ay) * ex
            if x < x_cross:
                inside = not inside
    return inside, on_boundary


def locate_point(mesh, point):
    """Element index containing a strictly interior point.

    Raises if the point sits on an element boundary (within a relative
    tolerance) or outside the mesh.
    """
    pt = np.asarray(point, dtype=float)
    for e in range(mesh.num_elements):
        x1, x2, y1, y2 = mesh.bbox[e]
        tol = 1e-12 * mesh.diameter[e]
        if not (x1 - tol <= pt[0] <= x2 + tol and y1 - tol <= pt[1] <= y2 + tol):
            continue
        inside, on_boundary = _point_in_polygon(pt, mesh.element_polygon(e), tol)
        if on_boundary:
            raise ValidationError(
                f"point {tuple(pt)} lies on the boundary of element {e}; pick an interior point")
        if inside:
            return e
    raise ValidationError(f"point {tuple(pt)} is outside the mesh")


def double_couple_source(fespace: FeSpace, location, time_function) -> SeparableLoad:
    """Distributional load F_i(t) = S(t) * (div Phi_i)(x_s).

    The pairing of -I . grad(delta(x - x_s)) with a vector test function,
    integrated by parts, leaves the divergence of the test function at the
    source point; only the containing element receives entries.
    """
    if fespace.ncomp != 2:
        raise ValidationError("double-couple sources need a 2-component space")
    elem = locate_point(fespace.mesh, location)
    tab = fespace.eval_basis(elem, np.asarray(location, dtype=float)[None, :])
    nb = fespace.nbases[elem]
    vector = np.zeros(fespace.ndof)
    dofs = fespace.element_dofs(elem)
    vector[dofs[:nb]] = tab.gradients[0, :, 0]
    vector[dofs[nb:]] = tab.gradients[0, :, 1]
    return SeparableLoad(vector=vector, time_function=time_function)


def plane_wave_dirichlet(tag: int, time_function) -> tuple[int, Callable]:
    """Spatially constant time-dependent Dirichlet datum for one boundary tag."""

    def g(x, y, t):
        return np.full_like(np.asarray(x, dtype=float), float(time_function(t)))

    return int(tag), g
