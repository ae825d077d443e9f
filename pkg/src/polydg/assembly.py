"""Global sparse DG operators: quadrature-free volume blocks, Gauss face blocks.

Volume matrices follow the quadrature-free route: per element, the
reference monomial coefficients of the basis are contracted with the
element's exact monomial integral table through dense matrix products, so
the only Python-level loop is the one over elements.  A sub-tessellation
variant with identical contracts doubles as oracle and benchmark baseline.

Face matrices hold the interior-penalty consistency (IA) and stabilization
(SA) terms; the full operator is V - IA - IA^T + SA.  Dirichlet conditions
are always imposed weakly through the face terms and the right-hand side.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import FeSpace, basis_index_map, monomial_expansion, monomial_expansion_gradient
from .errors import NumericalError, ValidationError
from .quadrature import (
    gauss_legendre_1d,
    map_rule_to_triangle,
    monomial_polygon_integrals,
    subtessellate,
    triangle_rule,
)

VOLUME_FORMS = ("mass", "stiffness", "divdiv", "elastic")
FACE_PHYSICS = ("scalar", "elastic", "poro_pressure")


class TripletMatrix:
    """Triplet-accumulated sparse matrix, sealed into canonical CSR.

    Blocks are deposited in a deterministic order; sealing sums duplicate
    entries with a fixed sort so assembled operators are bit-identical
    across runs and worker counts.
    """

    def __init__(self, shape):
        self.shape = shape
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []

    def add_block(self, rows, cols, block):
        block = np.asarray(block)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        self._rows.append(np.repeat(rows, cols.size))
        self._cols.append(np.tile(cols, rows.size))
        self._vals.append(block.ravel())

    def merge(self, other: "TripletMatrix"):
        self._rows.extend(other._rows)
        self._cols.extend(other._cols)
        self._vals.extend(other._vals)

    def tocsr(self) -> sp.csr_matrix:
        if not self._rows:
            return sp.csr_matrix(self.shape)
        rows = np.concatenate(self._rows)
        cols = np.concatenate(self._cols)
        vals = np.concatenate(self._vals)
        mat = sp.coo_matrix((vals, (rows, cols)), shape=self.shape).tocsr()
        mat.sum_duplicates()
        mat.sort_indices()
        return mat


@dataclass(frozen=True)
class PenaltySpec:
    """Interior-penalty coefficients, one value per mesh face."""

    c_alpha: float
    alpha: np.ndarray

    def __post_init__(self):
        self.alpha.setflags(write=False)


def face_penalty(face, weight, c_alpha, degrees, diameters) -> float:
    """Penalty value for one face.

    Internal faces take C_alpha * max over the two elements of
    w_k * ell_k^2 / h_k; boundary faces use the one-sided expression.
    """
    h_own = diameters[face.owner]
    if h_own <= 0.0:
        raise ValidationError(f"element {face.owner} has zero diameter")
    val = weight[face.owner] * degrees[face.owner] ** 2 / h_own
    if not face.is_boundary:
        h_nb = diameters[face.neighbor]
        if h_nb <= 0.0:
            raise ValidationError(f"element {face.neighbor} has zero diameter")
        val = max(val, weight[face.neighbor] * degrees[face.neighbor] ** 2 / h_nb)
    return c_alpha * val


def penalty_spec(fespace: FeSpace, weight, c_alpha: float) -> PenaltySpec:
    """Per-face penalty table for a coefficient weight (mu, lam+2mu, m, ...)."""
    weight = _per_element(fespace.mesh, weight)
    alpha = np.array([
        face_penalty(f, weight, c_alpha, fespace.degrees, fespace.mesh.diameter)
        for f in fespace.mesh.faces
    ])
    return PenaltySpec(c_alpha=float(c_alpha), alpha=alpha)


def _per_element(mesh, value) -> np.ndarray:
    if np.isscalar(value):
        return np.full(mesh.num_elements, float(value))
    arr = np.asarray(value, dtype=float)
    if arr.shape != (mesh.num_elements,):
        raise ValidationError("per-element coefficient has wrong length")
    return arr


class CoefficientField:
    """Element-wise constant physical parameters keyed by material tag."""

    def __init__(self, mesh, table: dict[int, dict[str, float]]):
        self.mesh = mesh
        self.table = {int(k): dict(v) for k, v in table.items()}
        missing = sorted(set(mesh.element_tag) - set(self.table))
        if missing:
            raise ValidationError(f"no material parameters for element tags {missing}")

    def values(self, name: str) -> np.ndarray:
        out = np.empty(self.mesh.num_elements)
        for e, tag in enumerate(self.mesh.element_tag):
            entry = self.table[int(tag)]
            if name not in entry:
                raise ValidationError(f"material tag {tag} is missing parameter {name!r}")
            out[e] = entry[name]
        return out

    def require_positive(self, name: str) -> np.ndarray:
        vals = self.values(name)
        if np.any(vals <= 0.0):
            raise ValidationError(f"parameter {name!r} must be positive on every element")
        return vals


# -- volume assembly ----------------------------------------------------------


def _moment_matrices(fespace: FeSpace, e: int, need_grad: bool):
    """Exact local moment matrices via the quadrature-free monomial route."""
    ell = int(fespace.degrees[e])
    pairs = basis_index_map(ell)
    km = np.array([p[0] for p in pairs])
    qm = np.array([p[1] for p in pairs])
    ref_poly = fespace.to_reference(e, fespace.mesh.element_polygon(e))
    table = monomial_polygon_integrals(ref_poly, 2 * ell, 2 * ell)
    itilde = table.values[km[:, None] + km[None, :], qm[:, None] + qm[None, :]]
    coeff = monomial_expansion(ell)
    mass = coeff @ itilde @ coeff.T
    if not need_grad:
        return mass, None, None, None
    x1, x2, y1, y2 = fespace.mesh.bbox[e]
    hx, hy = 2.0 / (x2 - x1), 2.0 / (y2 - y1)
    cx, cy = monomial_expansion_gradient(ell)
    gxx = (hx * hx) * (cx @ itilde @ cx.T)
    gyy = (hy * hy) * (cy @ itilde @ cy.T)
    gxy = (hx * hy) * (cx @ itilde @ cy.T)
    return mass, gxx, gyy, gxy


def _sampled_moments(fespace: FeSpace, e: int, need_grad: bool):
    """Local moment matrices from sub-tessellation quadrature (ST route)."""
    ell = int(fespace.degrees[e])
    rule = triangle_rule(ell)
    pts_list, w_list = [], []
    for tri in subtessellate(fespace.mesh.element_polygon(e)):
        pts, w = map_rule_to_triangle(rule, tri)
        pts_list.append(pts)
        w_list.append(w)
    pts = np.vstack(pts_list)
    w = np.concatenate(w_list)
    tab = fespace.eval_basis(e, pts)
    wphi = w[:, None] * tab.values
    mass = tab.values.T @ wphi
    if not need_grad:
        return mass, None, None, None
    gx = tab.gradients[:, :, 0]
    gy = tab.gradients[:, :, 1]
    gxx = gx.T @ (w[:, None] * gx)
    gyy = gy.T @ (w[:, None] * gy)
    gxy = gx.T @ (w[:, None] * gy)
    return mass, gxx, gyy, gxy


def _local_form(form, moments, coef_e):
    _, gxx, gyy, gxy = moments
    if form == "stiffness":
        return coef_e * (gxx + gyy)
    if form == "divdiv":
        m = coef_e
        return np.block([[m * gxx, m * gxy], [m * gxy.T, m * gyy]])
    if form == "elastic":
        lam, mu = coef_e
        a11 = (lam + 2 * mu) * gxx + mu * gyy
        a22 = (lam + 2 * mu) * gyy + mu * gxx
        a12 = lam * gxy + mu * gxy.T
        return np.block([[a11, a12], [a12.T, a22]])
    raise ValidationError(f"unknown volume form {form!r}")


def _volume_coefficients(fespace, coefficient, form):
    mesh = fespace.mesh
    if form == "elastic":
        lam, mu = coefficient
        return _per_element(mesh, lam), _per_element(mesh, mu)
    return (_per_element(mesh, coefficient),)


def _expand_mass(form, mass, ncomp):
    if ncomp == 2:
        z = np.zeros_like(mass)
        return np.block([[mass, z], [z, mass]])
    return mass


def _assemble_volume(fespace: FeSpace, coefficient, form: str, moment_fn, threads: int):
    if form not in VOLUME_FORMS:
        raise ValidationError(f"unknown volume form {form!r}")
    if form in ("divdiv", "elastic") and fespace.ncomp != 2:
        raise ValidationError(f"form {form!r} needs a 2-component space")
    coefs = _volume_coefficients(fespace, coefficient, form)
    need_grad = form != "mass"
    nel = fespace.mesh.num_elements

    def run_chunk(lo, hi):
        acc = TripletMatrix((fespace.ndof, fespace.ndof))
        for e in range(lo, hi):
            moments = moment_fn(fespace, e, need_grad)
            if form == "mass":
                block = _expand_mass(form, coefs[0][e] * moments[0], fespace.ncomp)
            elif form == "elastic":
                block = _local_form(form, moments, (coefs[0][e], coefs[1][e]))
            else:
                block = _local_form(form, moments, coefs[0][e])
            dofs = fespace.element_dofs(e)
            acc.add_block(dofs, dofs, block)
        return acc

    out = TripletMatrix((fespace.ndof, fespace.ndof))
    if threads <= 1 or nel < 8:
        out.merge(run_chunk(0, nel))
    else:
        bounds = np.linspace(0, nel, 4 * threads + 1).astype(int)
        chunks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for acc in pool.map(lambda ab: run_chunk(*ab), chunks):
                out.merge(acc)
    return out.tocsr()


def assemble_volume_qf(fespace: FeSpace, coefficient, form: str, threads: int = 1):
    """Quadrature-free volume matrix; exact for the polynomial integrands.

    ``coefficient`` is an element-wise constant array (or scalar); the
    elastic form takes the (lam, mu) pair.
    """
    return _assemble_volume(fespace, coefficient, form, _moment_matrices, threads)


def assemble_volume_st(fespace: FeSpace, coefficient, form: str, threads: int = 1):
    """Sub-tessellation volume matrix with the same contract as the QF route."""
    return _assemble_volume(fespace, coefficient, form, _sampled_moments, threads)


# -- face assembly ------------------------------------------------------------


def _face_points(mesh, face, n_gauss):
    rule = gauss_legendre_1d(n_gauss)
    a = mesh.vertices[face.vertices[0]]
    b = mesh.vertices[face.vertices[1]]
    pts = a[None, :] + 0.5 * (rule.nodes[:, None] + 1.0) * (b - a)[None, :]
    w = rule.weights * (face.length / 2.0)
    return pts, w


def _trace_arrays(physics, tab, normal, coef_e, nb):
    """(test trace S, trial flux B) arrays of shape (nq, r, ndof_elem)."""
    nq = tab.values.shape[0]
    if physics == "scalar":
        mu = coef_e
        s = tab.values[:, None, :]
        b = mu * (tab.gradients @ normal)[:, None, :]
        return s, b
    gx = tab.gradients[:, :, 0]
    gy = tab.gradients[:, :, 1]
    n1, n2 = normal
    if physics == "elastic":
        lam, mu = coef_e
        s = np.zeros((nq, 2, 2 * nb))
        s[:, 0, :nb] = tab.values
        s[:, 1, nb:] = tab.values
        b = np.empty((nq, 2, 2 * nb))
        b[:, 0, :nb] = (lam + 2 * mu) * gx * n1 + mu * gy * n2
        b[:, 1, :nb] = mu * gy * n1 + lam * gx * n2
        b[:, 0, nb:] = lam * gy * n1 + mu * gx * n2
        b[:, 1, nb:] = mu * gx * n1 + (lam + 2 * mu) * gy * n2
        return s, b
    if physics == "poro_pressure":
        m = coef_e
        s = np.empty((nq, 1, 2 * nb))
        s[:, 0, :nb] = tab.values * n1
        s[:, 0, nb:] = tab.values * n2
        b = np.empty((nq, 1, 2 * nb))
        b[:, 0, :nb] = m * gx
        b[:, 0, nb:] = m * gy
        return s, b
    raise ValidationError(f"unknown face physics {physics!r}")


def _pair_block(w, s_test, b_trial):
    return np.einsum("q,qri,qrj->ij", w, s_test, b_trial)


def _face_coef(physics, coefficient, e):
    if physics == "elastic":
        return coefficient[0][e], coefficient[1][e]
    return coefficient[e]


def assemble_faces(fespace: FeSpace, coefficient, penalty: PenaltySpec,
                   physics: str = "scalar", dirichlet_tags=()):
    """Interior-penalty face matrices (IA consistency, SA stabilization).

    Internal faces contribute the four two-sided blocks; boundary faces
    whose tag is listed in ``dirichlet_tags`` contribute the one-sided
    analogues of the weak Dirichlet imposition; every other boundary face
    contributes nothing.  The penalty table must cover all participating
    faces.
    """
    if physics not in FACE_PHYSICS:
        raise ValidationError(f"unknown face physics {physics!r}")
    if physics in ("elastic",) and fespace.ncomp != 2:
        raise ValidationError("elastic face physics needs a 2-component space")
    if physics == "poro_pressure" and fespace.ncomp != 2:
        raise ValidationError("poro_pressure face physics needs a 2-component space")
    mesh = fespace.mesh
    if physics == "elastic":
        coefficient = (_per_element(mesh, coefficient[0]), _per_element(mesh, coefficient[1]))
    else:
        coefficient = _per_element(mesh, coefficient)
    dirichlet_tags = set(int(t) for t in dirichlet_tags)

    ia = TripletMatrix((fespace.ndof, fespace.ndof))
    sa = TripletMatrix((fespace.ndof, fespace.ndof))
    for f_idx, face in enumerate(mesh.faces):
        if face.is_boundary and face.tag not in dirichlet_tags:
            continue
        alpha = penalty.alpha[f_idx]
        if not alpha > 0.0:
            raise ValidationError(f"face {f_idx} has no positive penalty value")
        own = face.owner
        if face.is_boundary:
            nq = int(fespace.degrees[own]) + 2
            pts, w = _face_points(mesh, face, nq)
            tab = fespace.eval_basis(own, pts)
            s, b = _trace_arrays(physics, tab, face.normal,
                                 _face_coef(physics, coefficient, own),
                                 fespace.nbases[own])
            dofs = fespace.element_dofs(own)
            ia.add_block(dofs, dofs, _pair_block(w, s, b))
            sa.add_block(dofs, dofs, alpha * _pair_block(w, s, s))
            continue
        nb_ = face.neighbor
        nq = max(int(fespace.degrees[own]), int(fespace.degrees[nb_])) + 2
        pts, w = _face_points(mesh, face, nq)
        tab_o = fespace.eval_basis(own, pts)
        tab_n = fespace.eval_basis(nb_, pts)
        s_o, b_o = _trace_arrays(physics, tab_o, face.normal,
                                 _face_coef(physics, coefficient, own),
                                 fespace.nbases[own])
        s_n, b_n = _trace_arrays(physics, tab_n, face.normal,
                                 _face_coef(physics, coefficient, nb_),
                                 fespace.nbases[nb_])
        d_o = fespace.element_dofs(own)
        d_n = fespace.element_dofs(nb_)
        # Consistency: ({flux(u)}, [v]); the test jump carries the sign.
        ia.add_block(d_o, d_o, 0.5 * _pair_block(w, s_o, b_o))
        ia.add_block(d_o, d_n, 0.5 * _pair_block(w, s_o, b_n))
        ia.add_block(d_n, d_o, -0.5 * _pair_block(w, s_n, b_o))
        ia.add_block(d_n, d_n, -0.5 * _pair_block(w, s_n, b_n))
        # Stabilization: alpha ([u], [v]).
        sa.add_block(d_o, d_o, alpha * _pair_block(w, s_o, s_o))
        sa.add_block(d_o, d_n, -alpha * _pair_block(w, s_o, s_n))
        sa.add_block(d_n, d_o, -alpha * _pair_block(w, s_n, s_o))
        sa.add_block(d_n, d_n, alpha * _pair_block(w, s_n, s_n))
    return ia.tocsr(), sa.tocsr()


def combine_dg_operator(volume, ia, sa, symmetrize: bool = True):
    """A_dG = V - IA - IA^T + SA, optionally checked/sealed symmetric."""
    if not (volume.shape == ia.shape == sa.shape):
        raise ValidationError("operator blocks have mismatched dimensions")
    a = (volume - ia - ia.T + sa).tocsr()
    if symmetrize:
        asym = abs(a - a.T)
        amax = abs(a).max() if a.nnz else 0.0
        if a.nnz and asym.nnz and asym.max() > 1e-12 * max(amax, 1e-300):
            raise NumericalError("combined DG operator failed the symmetry check")
        a = ((a + a.T) * 0.5).tocsr()
    a.sort_indices()
    return a


# -- right-hand sides and projections ----------------------------------------


class RhsAssembler:
    """Cached quadrature geometry for (possibly time-dependent) load vectors.

    The volume part uses the sub-tessellation rule (sources need not be
    polynomial); the boundary part adds the weak-Dirichlet terms
    -(g, flux(v)) + (alpha g, v) on the requested tags.  Building the
    assembler once makes each evaluation a sparse mat-vec.
    """

    def __init__(self, fespace: FeSpace, coefficient=None, penalty: PenaltySpec | None = None,
                 dirichlet_tags=(), physics: str = "scalar", extra_degree: int = 1,
                 volume_weight=None):
        self.fespace = fespace
        self.ncomp = fespace.ncomp
        self.physics = physics
        mesh = fespace.mesh
        ndof = fespace.ndof
        if volume_weight is not None:
            volume_weight = _per_element(mesh, volume_weight)

        pts_all, rows, cols, vals = [], [[] for _ in range(self.ncomp)], [], [[] for _ in range(self.ncomp)]
        col_off = 0
        for e in range(mesh.num_elements):
            ell = int(fespace.degrees[e])
            rule = triangle_rule(ell + extra_degree)
            scale = 1.0 if volume_weight is None else volume_weight[e]
            for tri in subtessellate(mesh.element_polygon(e)):
                pts, w = map_rule_to_triangle(rule, tri)
                tab = fespace.eval_basis(e, pts)
                wphi = (scale * w[:, None]) * tab.values  # (nq, nb)
                dofs = fespace.element_dofs(e)
                nb = fespace.nbases[e]
                for c in range(self.ncomp):
                    rows[c].append(np.repeat(dofs[c * nb:(c + 1) * nb], len(w)))
                    vals[c].append(wphi.T.ravel())
                cols.append(np.tile(np.arange(col_off, col_off + len(w)), nb))
                pts_all.append(pts)
                col_off += len(w)
        self.volume_points = np.vstack(pts_all) if pts_all else np.zeros((0, 2))
        npts = col_off
        col_arr = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
        self._vol = [
            sp.coo_matrix((np.concatenate(vals[c]), (np.concatenate(rows[c]), col_arr)),
                          shape=(ndof, npts)).tocsr()
            for c in range(self.ncomp)
        ]

        self._dir = None
        self._nrhs_dir = 1 if physics == "poro_pressure" else self.ncomp
        self.dirichlet_points = np.zeros((0, 2))
        self.dirichlet_normals = np.zeros((0, 2))
        self.dirichlet_point_tags = np.zeros(0, dtype=int)
        if dirichlet_tags:
            if penalty is None:
                raise ValidationError("Dirichlet right-hand side needs a penalty spec")
            tags = set(int(t) for t in dirichlet_tags)
            if physics == "elastic":
                coefficient = (_per_element(mesh, coefficient[0]),
                               _per_element(mesh, coefficient[1]))
            else:
                coefficient = _per_element(mesh, coefficient)
            nr = self._nrhs_dir
            fpts, fnrm, ftags = [], [], []
            frows, fcols, fvals = [[] for _ in range(nr)], [], [[] for _ in range(nr)]
            fcol_off = 0
            for f_idx, face in enumerate(mesh.faces):
                if not face.is_boundary or face.tag not in tags:
                    continue
                own = face.owner
                nq = int(fespace.degrees[own]) + 2
                pts, w = _face_points(mesh, face, nq)
                tab = fespace.eval_basis(own, pts)
                nb = fespace.nbases[own]
                s, b = _trace_arrays(physics, tab, face.normal,
                                     _face_coef(physics, coefficient, own), nb)
                alpha = penalty.alpha[f_idx]
                combo = alpha * s - b  # (nq, r, ndof_elem), datum enters per r-slot
                dofs = fespace.element_dofs(own)
                for r in range(nr):
                    weighted = (w[:, None] * combo[:, r, :])  # (nq, ndof_elem)
                    frows[r].append(np.repeat(dofs, len(w)))
                    fvals[r].append(weighted.T.ravel())
                fcols.append(np.tile(np.arange(fcol_off, fcol_off + len(w)), len(dofs)))
                fpts.append(pts)
                fnrm.append(np.broadcast_to(face.normal, (len(w), 2)))
                ftags.append(np.full(len(w), face.tag, dtype=int))
                fcol_off += len(w)
            if fcol_off:
                self.dirichlet_points = np.vstack(fpts)
                self.dirichlet_normals = np.vstack(fnrm)
                self.dirichlet_point_tags = np.concatenate(ftags)
                self._dir = [
                    sp.coo_matrix((np.concatenate(fvals[r]),
                                   (np.concatenate(frows[r]), np.concatenate(fcols))),
                                  shape=(ndof, fcol_off)).tocsr()
                    for r in range(nr)
                ]

    def _sample(self, func, pts, t):
        x, y = pts[:, 0], pts[:, 1]
        out = np.asarray(func(x, y, t), dtype=float)
        if self.ncomp == 1:
            return np.broadcast_to(np.atleast_1d(out), (len(pts),))[None, :]
        if out.shape == (len(pts), 2):
            return out.T
        if out.shape == (2, len(pts)):
            return out
        if out.shape == (2,):
            return np.broadcast_to(out[:, None], (2, len(pts)))
        raise ValidationError("vector-valued data must return shape (n, 2)")

    def volume(self, source, t: float = 0.0) -> np.ndarray:
        """Integrate (source, v) over all elements."""
        f = np.zeros(self.fespace.ndof)
        if source is None or len(self.volume_points) == 0:
            return f
        samples = self._sample(source, self.volume_points, t)
        for c in range(self.ncomp):
            f += self._vol[c] @ samples[c]
        return f

    def dirichlet(self, g, t: float = 0.0) -> np.ndarray:
        """Weak-Dirichlet boundary contribution -(g, flux(v)) + (alpha g, v).

        ``g`` is a callable applied on every participating face, or a
        {tag: callable} dict with per-tag data (missing or None entries are
        homogeneous).  For the poro-pressure form the vector datum enters
        through its outward normal trace g . n.
        """
        f = np.zeros(self.fespace.ndof)
        if self._dir is None or g is None:
            return f
        npts = len(self.dirichlet_points)
        if isinstance(g, dict):
            samples = np.zeros((self.ncomp, npts))
            for tag, fn in g.items():
                if fn is None:
                    continue
                mask = self.dirichlet_point_tags == int(tag)
                if not np.any(mask):
                    continue
                samples[:, mask] = self._sample(fn, self.dirichlet_points[mask], t)
        else:
            samples = self._sample(g, self.dirichlet_points, t)
        if self.physics == "poro_pressure":
            samples = np.sum(samples.T * self.dirichlet_normals, axis=1)[None, :]
        for r in range(self._nrhs_dir):
            f += self._dir[r] @ samples[r]
        return f

    def assemble(self, source, g, t: float = 0.0) -> np.ndarray:
        return self.volume(source, t) + self.dirichlet(g, t)


def assemble_rhs(fespace: FeSpace, source, dirichlet, coefficient,
                 penalty: PenaltySpec | None, dirichlet_tags=(), t: float = 0.0,
                 physics: str = "scalar") -> np.ndarray:
    """One-shot load vector; build an RhsAssembler to reuse across time steps."""
    asm = RhsAssembler(fespace, coefficient, penalty, dirichlet_tags, physics)
    return asm.assemble(source, dirichlet, t)


def l2_project(fespace: FeSpace, function) -> np.ndarray:
    """Element-wise L2 projection onto the discrete space.

    Exact for polynomials up to the local degree; the local mass matrices
    come from the quadrature-free route, the data integrals from the
    sub-tessellation rule.
    """
    u = np.zeros(fespace.ndof)
    mesh = fespace.mesh
    for e in range(mesh.num_elements):
        ell = int(fespace.degrees[e])
        mass = _moment_matrices(fespace, e, need_grad=False)[0]
        rule = triangle_rule(ell + 1)
        pts_list, w_list = [], []
        for tri in subtessellate(mesh.element_polygon(e)):
            pts, w = map_rule_to_triangle(rule, tri)
            pts_list.append(pts)
            w_list.append(w)
        pts = np.vstack(pts_list)
        w = np.concatenate(w_list)
        tab = fespace.eval_basis(e, pts)
        vals = function(pts[:, 0], pts[:, 1])
        dofs = fespace.element_dofs(e)
        nb = fespace.nbases[e]
        if fespace.ncomp == 1:
            rhs = tab.values.T @ (w * np.broadcast_to(np.atleast_1d(vals), (len(w),)))
            u[dofs] = np.linalg.solve(mass, rhs)
        else:
            vals = np.asarray(vals, dtype=float)
            if vals.shape != (len(w), 2):
                raise ValidationError("vector initial data must return shape (n, 2)")
            for c in range(2):
                rhs = tab.values.T @ (w * vals[:, c])
                u[dofs[c * nb:(c + 1) * nb]] = np.linalg.solve(mass, rhs)
    return u


# -- interface coupling --------------------------------------------------------


def interface_coupling_matrices(poro_space: FeSpace, acoustic_space: FeSpace,
                                face_pairs, rho_a):
    """Poroelastic/acoustic interface blocks.

    ``face_pairs`` lists (poro face index, acoustic face index) for the
    aligned interface faces of the two submeshes.  C^p couples the acoustic
    potential rate into both displacement equations through
    (rho_a * phi_dot, w . n_p); C^a = -(C^p)^T exactly by construction.
    ``rho_a`` is a constant or an {acoustic face index: value} dict.
    """
    if poro_space.ncomp != 2 or acoustic_space.ncomp != 1:
        raise ValidationError("interface coupling expects vector poro and scalar acoustic spaces")
    cp = TripletMatrix((poro_space.ndof, acoustic_space.ndof))
    p_mesh, a_mesh = poro_space.mesh, acoustic_space.mesh
    for pf_idx, af_idx in face_pairs:
        rho_face = rho_a[af_idx] if isinstance(rho_a, dict) else float(rho_a)
        pf = p_mesh.faces[pf_idx]
        af = a_mesh.faces[af_idx]
        if not (pf.is_boundary and af.is_boundary):
            raise ValidationError("interface faces must be boundary faces of both submeshes")
        e_p, e_a = pf.owner, af.owner
        nq = max(int(poro_space.degrees[e_p]), int(acoustic_space.degrees[e_a])) + 2
        pts, w = _face_points(p_mesh, pf, nq)
        ends_p = np.sort(p_mesh.vertices[list(pf.vertices)], axis=0)
        ends_a = np.sort(a_mesh.vertices[list(af.vertices)], axis=0)
        if not np.allclose(ends_p, ends_a, rtol=0.0, atol=1e-12):
            raise ValidationError("interface face pair is not geometrically aligned")
        n_p = pf.normal  # outward from the poroelastic side
        tab_p = poro_space.eval_basis(e_p, pts)
        tab_a = acoustic_space.eval_basis(e_a, pts)
        nb_p = poro_space.nbases[e_p]
        wn = np.empty((len(w), 2 * nb_p))
        wn[:, :nb_p] = tab_p.values * n_p[0]
        wn[:, nb_p:] = tab_p.values * n_p[1]
        block = rho_face * (wn.T @ (w[:, None] * tab_a.values))
        cp.add_block(poro_space.element_dofs(e_p), acoustic_space.element_dofs(e_a), block)
    cp_csr = cp.tocsr()
    ca_csr = (-cp_csr.T).tocsr()
    return cp_csr, ca_csr
