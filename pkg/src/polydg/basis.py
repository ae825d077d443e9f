"""Modal tensor-Legendre bases on element bounding boxes.

Each element carries the span of L̂_j(xi) * L̂_k(eta) with j+k <= ell, where
L̂ are L2(-1,1)-orthonormal Legendre polynomials and (xi, eta) are affine
bounding-box coordinates.  The scaling makes the local mass matrix the
identity whenever an element coincides with its own bounding box.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

MAX_DEGREE = 10


def basis_dimension(ell: int) -> int:
    """Dimension of the bivariate total-degree-ell polynomial space."""
    if ell < 0:
        raise ValueError("polynomial degree must be >= 0")
    return (ell + 1) * (ell + 2) // 2


@lru_cache(maxsize=None)
def basis_index_map(ell: int) -> tuple[tuple[int, int], ...]:
    """Canonical (j, k) exponent pairs: total degree ascending, then j ascending.

    The ordering is hierarchical: the first basis_dimension(ell-1) pairs of
    degree ell coincide with the degree-(ell-1) map.
    """
    if ell < 0:
        raise ValueError("polynomial degree must be >= 0")
    pairs = []
    for total in range(ell + 1):
        for j in range(total + 1):
            pairs.append((j, total - j))
    return tuple(pairs)


def eval_legendre_1d(ell: int, points: np.ndarray):
    """Orthonormal Legendre values and derivatives at points in [-1,1].

    Returns (values, derivatives), both of shape (ell+1, npts).  L̂_k is the
    standard P_k scaled by sqrt((2k+1)/2); recurrences keep the evaluation
    stable for every supported degree.
    """
    x = np.atleast_1d(np.asarray(points, dtype=float))
    vals = np.empty((ell + 1, x.size))
    ders = np.empty((ell + 1, x.size))
    p_prev = np.ones_like(x)
    d_prev = np.zeros_like(x)
    vals[0], ders[0] = p_prev, d_prev
    if ell >= 1:
        p, d = x, np.ones_like(x)
        vals[1], ders[1] = p, d
        for k in range(1, ell):
            p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
            d_next = d_prev + (2 * k + 1) * p
            p_prev, p = p, p_next
            d_prev, d = d, d_next
            vals[k + 1], ders[k + 1] = p, d
    scale = np.sqrt((2 * np.arange(ell + 1) + 1) / 2.0)
    return vals * scale[:, None], ders * scale[:, None]


@lru_cache(maxsize=None)
def _legendre_monomial_coeffs_1d(ell: int) -> tuple[tuple[Fraction, ...], ...]:
    """Monomial coefficients of standard P_0..P_ell as exact rationals."""
    rows = [[Fraction(1)], [Fraction(0), Fraction(1)]]
    for k in range(1, ell):
        prev, cur = rows[k - 1], rows[k]
        nxt = [Fraction(0)] * (k + 2)
        for p, c in enumerate(cur):
            nxt[p + 1] += Fraction(2 * k + 1, k + 1) * c
        for p, c in enumerate(prev):
            nxt[p] -= Fraction(k, k + 1) * c
        rows.append(nxt)
    return tuple(tuple(r) for r in rows[: ell + 1])


@lru_cache(maxsize=None)
def monomial_expansion(ell: int) -> np.ndarray:
    """Reference monomial coefficients of the modal basis.

    Returns C of shape (nb, nb) with
    phî_i(xi, eta) = sum_m C[i, m] xi^k_m eta^q_m, the monomials indexed by
    the same canonical map as the basis.  The element scaling s_kappa is not
    included.  Coefficients are derived from exact rational Legendre
    recurrences and computed once per degree.
    """
    pairs = basis_index_map(ell)
    nb = len(pairs)
    index = {pair: m for m, pair in enumerate(pairs)}
    coeffs_1d = _legendre_monomial_coeffs_1d(ell) if ell >= 1 else ((Fraction(1),),)
    scale = [np.sqrt((2 * k + 1) / 2.0) for k in range(ell + 1)]
    out = np.zeros((nb, nb))
    for i, (j, k) in enumerate(pairs):
        sjk = scale[j] * scale[k]
        for p, cp in enumerate(coeffs_1d[j]):
            if cp == 0:
                continue
            for r, cr in enumerate(coeffs_1d[k]):
                if cr == 0:
                    continue
                out[i, index[(p, r)]] += float(cp * cr) * sjk
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def monomial_expansion_gradient(ell: int):
    """Monomial coefficients of (d/dxi, d/deta) of the reference basis.

    Both factors are returned over the same canonical monomial index set
    (differentiation lowers the degree, so the set is closed).
    """
    pairs = basis_index_map(ell)
    index = {pair: m for m, pair in enumerate(pairs)}
    c = monomial_expansion(ell)
    cx = np.zeros_like(c)
    cy = np.zeros_like(c)
    for m, (k, q) in enumerate(pairs):
        if k >= 1:
            cx[:, index[(k - 1, q)]] += k * c[:, m]
        if q >= 1:
            cy[:, index[(k, q - 1)]] += q * c[:, m]
    cx.setflags(write=False)
    cy.setflags(write=False)
    return cx, cy


@dataclass(frozen=True)
class BasisTable:
    """Basis values and physical-coordinate gradients at a point set."""

    values: np.ndarray     # (npts, nb)
    gradients: np.ndarray  # (npts, nb, 2)


class FeSpace:
    """Discontinuous per-element polynomial space over a polygonal mesh.

    Parameters
    ----------
    mesh : PolyMesh
        Tessellation the space lives on.
    degree : int or array_like
        Uniform degree or a per-element degree vector.
    ncomp : int
        1 for scalar fields, 2 for planar vector fields.  Vector DOFs are
        blocked per element: all first-component modes, then the second.
    """

    def __init__(self, mesh, degree, ncomp: int = 1):
        if ncomp not in (1, 2):
            raise ValueError("ncomp must be 1 or 2")
        nel = mesh.num_elements
        degrees = np.full(nel, degree, dtype=int) if np.isscalar(degree) \
            else np.asarray(degree, dtype=int)
        if degrees.shape != (nel,):
            raise ValueError("degree vector length must match element count")
        if np.any(degrees < 0) or np.any(degrees > MAX_DEGREE):
            raise ValueError(f"degrees must lie in [0, {MAX_DEGREE}]")
        self.mesh = mesh
        self.ncomp = ncomp
        self.degrees = degrees
        self.nbases = (degrees + 1) * (degrees + 2) // 2
        self.offsets = np.concatenate([[0], np.cumsum(ncomp * self.nbases)])
        self.ndof = int(self.offsets[-1])

    def element_dofs(self, elem: int) -> np.ndarray:
        """Global DOF indices of an element (all components)."""
        return np.arange(self.offsets[elem], self.offsets[elem + 1])

    def to_reference(self, elem: int, points: np.ndarray) -> np.ndarray:
        """Map physical points onto the element's [-1,1]^2 bbox coordinates."""
        x1, x2, y1, y2 = self.mesh.bbox[elem]
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        xi = (2.0 * pts[:, 0] - (x1 + x2)) / (x2 - x1)
        eta = (2.0 * pts[:, 1] - (y1 + y2)) / (y2 - y1)
        return np.column_stack([xi, eta])

    def scaling(self, elem: int) -> float:
        """Normalization factor making the basis orthonormal on the bbox."""
        x1, x2, y1, y2 = self.mesh.bbox[elem]
        return 2.0 / np.sqrt((x2 - x1) * (y2 - y1))

    def eval_basis(self, elem: int, points: np.ndarray) -> BasisTable:
        """Evaluate all scalar modes of an element at physical points.

        Evaluation outside the element is legal; the modes are polynomials
        on the whole plane.
        """
        ell = int(self.degrees[elem])
        x1, x2, y1, y2 = self.mesh.bbox[elem]
        ref = self.to_reference(elem, points)
        vx, dx = eval_legendre_1d(ell, ref[:, 0])
        vy, dy = eval_legendre_1d(ell, ref[:, 1])
        jj, kk = _pair_arrays(ell)
        s = self.scaling(elem)
        vals = s * (vx[jj] * vy[kk]).T
        grads = np.empty((ref.shape[0], len(jj), 2))
        grads[:, :, 0] = s * (2.0 / (x2 - x1)) * (dx[jj] * vy[kk]).T
        grads[:, :, 1] = s * (2.0 / (y2 - y1)) * (vx[jj] * dy[kk]).T
        return BasisTable(values=vals, gradients=grads)


@lru_cache(maxsize=None)
def _pair_arrays(ell: int):
    pairs = basis_index_map(ell)
    jj = np.array([p[0] for p in pairs])
    kk = np.array([p[1] for p in pairs])
    return jj, kk


def eval_basis(fespace: FeSpace, elem: int, points: np.ndarray) -> BasisTable:
    """Module-level convenience wrapper around FeSpace.eval_basis."""
    return fespace.eval_basis(elem, points)
