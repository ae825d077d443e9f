"""Steady Poisson problem with weakly imposed Dirichlet conditions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..assembly import (
    CoefficientField,
    RhsAssembler,
    assemble_faces,
    assemble_volume_qf,
    combine_dg_operator,
    penalty_spec,
)
from ..basis import FeSpace
from ..config import DGConfig
from ..errors import NumericalError, ValidationError


@dataclass
class PoissonResult:
    fespace: FeSpace
    u: np.ndarray
    report: Optional[object] = None


def solve_poisson(config: DGConfig, threads: int = 1) -> PoissonResult:
    """Assemble and solve A_dG U = F by sparse direct factorization.

    With an exact solution configured, the returned result carries the
    (Nel, h, p, L2, dG) error report.
    """
    mesh = config.mesh
    fes = FeSpace(mesh, config.degree)
    mu = CoefficientField(mesh, config.materials).require_positive("mu")
    dtags = config.dirichlet_tags()
    if not any(f.is_boundary and f.tag in set(dtags) for f in mesh.faces):
        raise ValidationError(
            "Poisson operator is singular: no Dirichlet face on the boundary")

    pen = penalty_spec(fes, mu, config.c_alpha)
    volume = assemble_volume_qf(fes, mu, "stiffness", threads)
    ia, sa = assemble_faces(fes, mu, pen, "scalar", dtags)
    a_dg = combine_dg_operator(volume, ia, sa)

    rhs = RhsAssembler(fes, mu, pen, dtags, "scalar")
    data = {tag: config.boundary_datum(tag) for tag in dtags}
    f = rhs.volume(config.source) + rhs.dirichlet(data)

    try:
        lu = spla.splu(sp.csc_matrix(a_dg))
    except RuntimeError as exc:
        raise NumericalError(
            f"Poisson factorization failed (ndof={fes.ndof}, "
            f"nnz={a_dg.nnz}): {exc}") from exc
    u = lu.solve(f)

    report = None
    if config.exact is not None:
        from ..analysis import compute_errors

        report = compute_errors(fes, u, config.exact, config.exact_grad,
                                mu, pen, dtags)
    return PoissonResult(fespace=fes, u=u, report=report)
