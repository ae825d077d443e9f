"""Linear elastodynamics with Newmark-beta time stepping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..assembly import (
    CoefficientField,
    RhsAssembler,
    assemble_faces,
    assemble_volume_qf,
    combine_dg_operator,
    l2_project,
    penalty_spec,
)
from ..basis import FeSpace
from ..config import DGConfig
from ..errors import ValidationError
from ..timestepping import NewmarkStepper
from .sources import DoubleCoupleSpec, double_couple_source


def lame_from_speeds(rho: float, c_s: float, c_p: float) -> tuple[float, float]:
    """(lambda, mu) from density and wave speeds: mu = rho c_s^2,
    lambda = rho (c_p^2 - 2 c_s^2)."""
    return rho * (c_p ** 2 - 2.0 * c_s ** 2), rho * c_s ** 2


def resolve_elastic_materials(mesh, materials):
    """Per-element (rho, lam, mu); material rows carry (lam, mu) or (c_s, c_p)."""
    table = {}
    for tag, entry in materials.items():
        entry = dict(entry)
        if "cs" in entry or "cp" in entry:
            lam, mu = lame_from_speeds(entry["rho"], entry["cs"], entry["cp"])
            entry["lam"], entry["mu"] = lam, mu
        table[tag] = entry
    coef = CoefficientField(mesh, table)
    rho = coef.require_positive("rho")
    mu = coef.require_positive("mu")
    lam = coef.require_positive("lam")
    return rho, lam, mu


@dataclass
class ElastodynamicsResult:
    fespace: FeSpace
    times: list = field(default_factory=list)
    displacements: list = field(default_factory=list)
    velocities: list = field(default_factory=list)
    mass: object = None
    stiffness: object = None
    report: Optional[object] = None

    @property
    def u(self) -> np.ndarray:
        return self.displacements[-1]


def solve_elastodynamics(config: DGConfig, threads: int = 1) -> ElastodynamicsResult:
    """March M u'' + A u = F(t) with Newmark (default beta=1/4, gamma=1/2).

    Face terms act on internal plus Dirichlet faces (Neumann faces are
    traction free and contribute nothing); the initial acceleration is
    solved from the governing equation at t = 0.
    """
    if config.time is None:
        raise ValidationError("elastodynamics needs a time block")
    mesh = config.mesh
    fes = FeSpace(mesh, config.degree, ncomp=2)
    rho, lam, mu = resolve_elastic_materials(mesh, config.materials)
    dtags = config.dirichlet_tags()

    pen = penalty_spec(fes, lam + 2.0 * mu, config.c_alpha)
    mass = assemble_volume_qf(fes, rho, "mass", threads)
    volume = assemble_volume_qf(fes, (lam, mu), "elastic", threads)
    ia, sa = assemble_faces(fes, (lam, mu), pen, "elastic", dtags)
    a_dg = combine_dg_operator(volume, ia, sa)

    rhs = RhsAssembler(fes, (lam, mu), pen, dtags, "elastic")
    data = {tag: config.boundary_datum(tag) for tag in dtags}
    point_load = None
    if config.point_source is not None:
        spec: DoubleCoupleSpec = config.point_source
        point_load = double_couple_source(fes, spec.location, spec.time_function)

    def load(t):
        f = rhs.volume(config.source, t) + rhs.dirichlet(data, t)
        if point_load is not None:
            f += point_load(t)
        return f

    zero = lambda x, y: np.zeros((len(np.atleast_1d(x)), 2))
    u = l2_project(fes, (lambda x, y: config.initial(x, y, 0.0)) if config.initial else zero)
    v = l2_project(fes, (lambda x, y: config.initial_velocity(x, y, 0.0))
                   if config.initial_velocity else zero)

    tc = config.time
    stepper = NewmarkStepper(mass, a_dg, tc.dt, beta=tc.newmark_beta, gamma=tc.newmark_gamma)
    a = stepper.initial_acceleration(u, v, load(0.0))

    result = ElastodynamicsResult(fespace=fes, mass=mass, stiffness=a_dg)
    stride = max(1, config.output.stride)
    result.times.append(0.0)
    result.displacements.append(u.copy())
    result.velocities.append(v.copy())
    nsteps = tc.num_steps
    for n in range(1, nsteps + 1):
        t_new = n * tc.dt
        u, v, a = stepper.step(u, v, a, load(t_new))
        if n % stride == 0 or n == nsteps:
            result.times.append(t_new)
            result.displacements.append(u.copy())
            result.velocities.append(v.copy())

    if config.exact is not None:
        from ..analysis import compute_errors

        result.report = compute_errors(fes, u, config.exact, config.exact_grad,
                                       (lam, mu), pen, dtags, t=nsteps * tc.dt,
                                       physics="elastic")
    return result
