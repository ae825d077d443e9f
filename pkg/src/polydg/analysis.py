"""Error norms, h/p convergence studies, assembly benchmarking, energy traces."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from statistics import median

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    PenaltySpec,
    RhsAssembler,
    _face_points,
    _per_element,
    assemble_faces,
    assemble_volume_qf,
    assemble_volume_st,
    combine_dg_operator,
    penalty_spec,
)
from .basis import FeSpace
from .config import DGConfig
from .errors import NumericalError, ValidationError
from .quadrature import map_rule_to_triangle, subtessellate, triangle_rule


@dataclass(frozen=True)
class ErrorReport:
    """(Nel, h, p, L2, dG) record of one solve against an exact solution."""

    nel: int
    h: float
    p: int
    l2: float
    dg: float

    def __str__(self):
        return (f"Nel = {self.nel}\nh = {self.h:.6g}\np = {self.p}\n"
                f"L2 = {self.l2:.6g}\ndG = {self.dg:.6g}")


@dataclass
class ConvergenceTable:
    """Error rows plus empirical orders between consecutive rows."""

    rows: list = field(default_factory=list)
    eoc_l2: list = field(default_factory=list)
    eoc_dg: list = field(default_factory=list)

    @staticmethod
    def from_reports(reports, rates: bool = True) -> "ConvergenceTable":
        table = ConvergenceTable(rows=list(reports))
        table.eoc_l2 = [None] * len(table.rows)
        table.eoc_dg = [None] * len(table.rows)
        if rates:
            for k in range(1, len(table.rows)):
                prev, cur = table.rows[k - 1], table.rows[k]
                if not cur.h < prev.h:
                    raise ValidationError("mesh sequence must have strictly decreasing h")
                denom = np.log(prev.h / cur.h)
                if prev.l2 > 0 and cur.l2 > 0:
                    table.eoc_l2[k] = float(np.log(prev.l2 / cur.l2) / denom)
                if prev.dg > 0 and cur.dg > 0:
                    table.eoc_dg[k] = float(np.log(prev.dg / cur.dg) / denom)
        return table

    def regression_slope(self, norm: str = "l2"):
        """Least-squares slope and correlation of log10(error) vs degree p."""
        errs = np.array([getattr(r, norm) for r in self.rows])
        ps = np.array([r.p for r in self.rows], dtype=float)
        mask = errs > 0
        y = np.log10(errs[mask])
        x = ps[mask]
        slope, intercept = np.polyfit(x, y, 1)
        r = float(np.corrcoef(x, y)[0, 1])
        return float(slope), r


def _sample_exact(func, pts, t, ncomp):
    out = np.asarray(func(pts[:, 0], pts[:, 1], t), dtype=float)
    if ncomp == 1:
        return np.broadcast_to(np.atleast_1d(out), (len(pts),))
    if out.shape != (len(pts), 2):
        raise ValidationError("vector exact solution must return shape (n, 2)")
    return out


def compute_errors(fespace: FeSpace, u, exact, exact_grad, coefficient,
                   penalty: PenaltySpec, dirichlet_tags=(), t: float = 0.0,
                   physics: str = "scalar") -> ErrorReport:
    """L2 and dG error norms of a discrete solution against an exact field.

    dG^2 combines the coefficient-weighted gradient (or stress) error over
    elements with penalty-weighted jumps over faces; interior jumps of the
    continuous exact solution vanish, so the face part uses jumps of u_h
    and the Dirichlet mismatch u_h - g on boundary faces.
    """
    if exact_grad is None:
        raise ValidationError("the dG error norm needs the exact gradient")
    mesh = fespace.mesh
    ncomp = fespace.ncomp
    if physics == "elastic":
        lam = _per_element(mesh, coefficient[0])
        mu = _per_element(mesh, coefficient[1])
    else:
        mu = _per_element(mesh, coefficient)

    l2_sq = 0.0
    grad_sq = 0.0
    for e in range(mesh.num_elements):
        ell = int(fespace.degrees[e])
        rule = triangle_rule(ell + 1)
        for tri in subtessellate(mesh.element_polygon(e)):
            pts, w = map_rule_to_triangle(rule, tri)
            tab = fespace.eval_basis(e, pts)
            dofs = fespace.element_dofs(e)
            nb = fespace.nbases[e]
            if ncomp == 1:
                uh = tab.values @ u[dofs]
                gh = np.stack([tab.gradients[:, :, 0] @ u[dofs],
                               tab.gradients[:, :, 1] @ u[dofs]], axis=1)
                uex = _sample_exact(exact, pts, t, 1)
                gex = np.asarray(exact_grad(pts[:, 0], pts[:, 1], t), dtype=float)
                if gex.shape != (len(pts), 2):
                    gex = np.column_stack([np.broadcast_to(g, len(pts)) for g in gex])
                l2_sq += np.sum(w * (uh - uex) ** 2)
                grad_sq += mu[e] * np.sum(w[:, None] * (gh - gex) ** 2)
            else:
                coefs = [u[dofs[c * nb:(c + 1) * nb]] for c in range(2)]
                uh = np.stack([tab.values @ c for c in coefs], axis=1)
                uex = _sample_exact(exact, pts, t, 2)
                l2_sq += np.sum(w[:, None] * (uh - uex) ** 2)
                jac_h = np.empty((len(pts), 2, 2))
                for ci in range(2):
                    jac_h[:, ci, 0] = tab.gradients[:, :, 0] @ coefs[ci]
                    jac_h[:, ci, 1] = tab.gradients[:, :, 1] @ coefs[ci]
                jac_ex = np.asarray(exact_grad(pts[:, 0], pts[:, 1], t), dtype=float)
                if jac_ex.shape != (len(pts), 2, 2):
                    raise ValidationError("elastic exact gradient must return (n, 2, 2)")
                err = jac_h - jac_ex
                eps = 0.5 * (err + np.swapaxes(err, 1, 2))
                tr = eps[:, 0, 0] + eps[:, 1, 1]
                energy = 2.0 * mu[e] * np.einsum("nij,nij->n", eps, eps) + lam[e] * tr ** 2
                grad_sq += np.sum(w * energy)

    face_sq = 0.0
    dtags = set(int(x) for x in dirichlet_tags)
    for f_idx, face in enumerate(mesh.faces):
        if face.is_boundary and face.tag not in dtags:
            continue
        own = face.owner
        nq = int(fespace.degrees[own]) + 3
        pts, w = _face_points(mesh, face, nq)
        alpha = penalty.alpha[f_idx]
        vals_o = _trace_values(fespace, own, pts, u)
        if face.is_boundary:
            gex = _sample_exact(exact, pts, t, ncomp)
            jump = vals_o - (gex if ncomp > 1 else gex)
        else:
            jump = vals_o - _trace_values(fespace, face.neighbor, pts, u)
        if ncomp == 1:
            face_sq += alpha * np.sum(w * jump ** 2)
        else:
            face_sq += alpha * np.sum(w[:, None] * jump ** 2)

    report = ErrorReport(
        nel=mesh.num_elements, h=mesh.h_max, p=int(fespace.degrees.max()),
        l2=float(np.sqrt(l2_sq)), dg=float(np.sqrt(grad_sq + face_sq)))
    return report


def _trace_values(fespace, e, pts, u):
    tab = fespace.eval_basis(e, pts)
    dofs = fespace.element_dofs(e)
    nb = fespace.nbases[e]
    if fespace.ncomp == 1:
        return tab.values @ u[dofs]
    return np.stack([tab.values @ u[dofs[c * nb:(c + 1) * nb]] for c in range(2)], axis=1)


def _solve_for_report(config: DGConfig) -> ErrorReport:
    if config.exact is None:
        raise ValidationError("convergence studies need an exact solution")
    if config.physics == "laplacian":
        from .physics.poisson import solve_poisson

        return solve_poisson(config).report
    if config.physics == "heat":
        from .physics.heat import solve_heat

        return solve_heat(config).report
    if config.physics == "elastodynamics":
        from .physics.elastodynamics import solve_elastodynamics

        return solve_elastodynamics(config).report
    raise ValidationError(f"convergence study does not support {config.physics!r}")


def h_convergence(config: DGConfig, meshes, degree=None) -> ConvergenceTable:
    """Solve on a sequence of meshes with decreasing h and report EOCs.

    Smooth solutions converge asymptotically at order ell+1 in L2 and ell
    in the dG norm.
    """
    if len(meshes) < 2:
        raise ValidationError("h-convergence needs at least two meshes")
    reports = [_solve_for_report(config.with_mesh(mesh, degree)) for mesh in meshes]
    return ConvergenceTable.from_reports(reports, rates=True)


def p_convergence(config: DGConfig, mesh, degrees) -> ConvergenceTable:
    """Solve on a fixed mesh for ascending degrees (p-refinement study)."""
    degrees = list(degrees)
    if degrees != sorted(degrees):
        raise ValidationError("degree range must be ascending")
    reports = [_solve_for_report(config.with_mesh(mesh, ell)) for ell in degrees]
    return ConvergenceTable.from_reports(reports, rates=False)


def energy_trace(states, rates, mass, stiffness) -> np.ndarray:
    """Discrete energies E = (v' M v + u' K u) / 2 along a trajectory."""
    return np.array([
        0.5 * (v @ (mass @ v) + u @ (stiffness @ u))
        for u, v in zip(states, rates)
    ])


def benchmark_assembly(mesh, ell: int, repetitions: int = 5, c_alpha: float = 10.0,
                       threads: int = 1, output_dir=None) -> dict:
    """Median phase timings for the QF and ST assembly routes.

    The two routes are cross-checked first; timings are only reported when
    the assembled operators agree to 1e-10 relative Frobenius.
    """
    if repetitions < 3:
        raise ValidationError("benchmark needs at least 3 repetitions")
    fes = FeSpace(mesh, ell)
    mu = np.ones(mesh.num_elements)
    pen = penalty_spec(fes, mu, c_alpha)
    dtags = sorted({f.tag for f in mesh.boundary_faces()})

    def build(volume_fn):
        vol = volume_fn(fes, mu, "stiffness", threads)
        ia, sa = assemble_faces(fes, mu, pen, "scalar", dtags)
        return combine_dg_operator(vol, ia, sa)

    a_qf = build(assemble_volume_qf)
    a_st = build(assemble_volume_st)
    rel = spla.norm(a_qf - a_st) / max(spla.norm(a_qf), 1e-300)
    if rel > 1e-10:
        raise NumericalError(
            f"QF and ST assemblies disagree (rel Frobenius {rel:.3e}); timings withheld")

    exact = lambda x, y, t=0.0: np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)
    source = lambda x, y, t=0.0: 8 * np.pi ** 2 * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)

    t_qf, t_st, t_rhs, t_solve, t_out = [], [], [], [], []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        a_qf = build(assemble_volume_qf)
        t_qf.append(time.perf_counter() - t0)

        t0 = time.perf_counter()
        build(assemble_volume_st)
        t_st.append(time.perf_counter() - t0)

        t0 = time.perf_counter()
        rhs = RhsAssembler(fes, mu, pen, dtags, "scalar")
        f = rhs.assemble(source, exact)
        t_rhs.append(time.perf_counter() - t0)

        t0 = time.perf_counter()
        u = spla.spsolve(sp.csc_matrix(a_qf), f)
        t_solve.append(time.perf_counter() - t0)

        t0 = time.perf_counter()
        if output_dir is not None:
            from .io import build_snapshot, write_csv, write_vtk
            from pathlib import Path

            snap = build_snapshot(fes, u)
            write_vtk(mesh, fes, snap, Path(output_dir) / "bench.vtk")
            write_csv(snap, Path(output_dir) / "bench.csv")
        t_out.append(time.perf_counter() - t0)

    mean_vertices = float(np.mean([len(e) for e in mesh.elements]))
    return {
        "qf": median(t_qf), "st": median(t_st), "rhs": median(t_rhs),
        "solve": median(t_solve), "outputs": median(t_out),
        "nel": mesh.num_elements, "ndof": fes.ndof, "degree": int(ell),
        "mean_vertices_per_element": mean_vertices,
        "qf_st_rel_frobenius": float(rel),
    }
