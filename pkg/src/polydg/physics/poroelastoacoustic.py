"""Coupled Biot poroelasticity / acoustics with interface transmission terms.

The mesh is split by material role into aligned poroelastic and acoustic
submeshes; each single-physics operator is assembled on its own submesh and
the monolithic 3x3 block system (unknowns: solid displacement, filtration
displacement, acoustic potential) is their block composition plus the
interface coupling blocks, which satisfy C^a = -(C^p)^T exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from ..assembly import (
    CoefficientField,
    RhsAssembler,
    assemble_faces,
    assemble_volume_qf,
    combine_dg_operator,
    interface_coupling_matrices,
    l2_project,
    penalty_spec,
)
from ..basis import FeSpace
from ..config import INTERFACE_TAG, DGConfig
from ..errors import ValidationError
from ..mesh import extract_submesh
from ..timestepping import NewmarkStepper

POROELASTIC = "poroelastic"
ACOUSTIC = "acoustic"


def biot_derived_densities(phi: float, rho_f: float, rho_s: float, a: float):
    """(rho_p, rho_w): average density phi rho_f + (1-phi) rho_s and
    tortuosity-scaled fluid density (a/phi) rho_f."""
    return phi * rho_f + (1.0 - phi) * rho_s, (a / phi) * rho_f


def _validate_biot(tag, entry):
    phi = entry["phi"]
    if not 0.0 < phi < 1.0:
        raise ValidationError(f"material {tag}: porosity must satisfy 0 < phi < 1")
    if not entry["a"] > 1.0:
        raise ValidationError(f"material {tag}: tortuosity must satisfy a > 1")
    beta = entry["beta"]
    if not phi < beta <= 1.0:
        raise ValidationError(f"material {tag}: beta must lie in (phi, 1]")
    for key in ("m", "mu", "lam", "k", "eta", "rho_f", "rho_s"):
        if not entry[key] > 0.0:
            raise ValidationError(f"material {tag}: {key} must be positive")


def _roles(materials):
    roles = {}
    for tag, entry in materials.items():
        role = entry.get("role")
        if role not in (POROELASTIC, ACOUSTIC):
            raise ValidationError(
                f"material {tag} needs a role of {POROELASTIC!r} or {ACOUSTIC!r}")
        roles[int(tag)] = role
    return roles


@dataclass
class PoroAcousticSystem:
    """Assembled block system plus the per-physics pieces it is composed of."""

    poro_space: FeSpace
    acoustic_space: FeSpace
    poro_parent: np.ndarray
    acoustic_parent: np.ndarray
    mass: sp.csr_matrix
    damping: sp.csr_matrix
    stiffness: sp.csr_matrix
    blocks: dict
    rhs_poro: RhsAssembler
    rhs_acoustic: RhsAssembler
    acoustic_data: dict
    sources: dict

    @property
    def ndof_p(self) -> int:
        return self.poro_space.ndof

    @property
    def ndof_a(self) -> int:
        return self.acoustic_space.ndof

    @property
    def ndof(self) -> int:
        return 2 * self.ndof_p + self.ndof_a

    def split(self, vec):
        np_ = self.ndof_p
        return vec[:np_], vec[np_:2 * np_], vec[2 * np_:]

    def load(self, t: float) -> np.ndarray:
        f_p = self.rhs_poro.volume(self.sources.get("poroelastic"), t)
        f_f = self.rhs_poro.volume(self.sources.get("filtration"), t)
        f_a = self.rhs_acoustic.volume(self.sources.get("acoustic"), t) \
            + self.rhs_acoustic.dirichlet(self.acoustic_data, t)
        return np.concatenate([f_p, f_f, f_a])


def assemble_poroelastoacoustic(config: DGConfig, threads: int = 1) -> PoroAcousticSystem:
    """Build the monolithic mass/damping/stiffness blocks of the coupled system."""
    mesh = config.mesh
    roles = _roles(config.materials)
    unknown = sorted(set(int(t) for t in mesh.element_tag) - set(roles))
    if unknown:
        raise ValidationError(f"no material role for element tags {unknown}")
    poro_mask = np.array([roles[int(t)] == POROELASTIC for t in mesh.element_tag])
    if not poro_mask.any() or poro_mask.all():
        raise ValidationError("the mesh must contain both poroelastic and acoustic elements")

    poro_sub, p_parent, p_verts = extract_submesh(mesh, poro_mask, INTERFACE_TAG)
    ac_sub, a_parent, a_verts = extract_submesh(mesh, ~poro_mask, INTERFACE_TAG)
    v_p = FeSpace(poro_sub, config.degree, ncomp=2)
    v_a = FeSpace(ac_sub, config.degree)

    poro_mat = {}
    for tag, entry in config.materials.items():
        if roles[int(tag)] != POROELASTIC:
            continue
        entry = dict(entry)
        _validate_biot(tag, entry)
        rho_p, rho_w = biot_derived_densities(entry["phi"], entry["rho_f"],
                                              entry["rho_s"], entry["a"])
        entry["rho_p"], entry["rho_w"] = rho_p, rho_w
        poro_mat[int(tag)] = entry
    coef_p = CoefficientField(poro_sub, poro_mat)
    lam, mu = coef_p.values("lam"), coef_p.values("mu")
    m_mod = coef_p.values("m")
    beta = coef_p.values("beta")
    rho_p, rho_f = coef_p.values("rho_p"), coef_p.values("rho_f")
    rho_w = coef_p.values("rho_w")
    eta_over_k = coef_p.values("eta") / coef_p.values("k")

    ac_mat = {int(t): dict(e) for t, e in config.materials.items() if roles[int(t)] == ACOUSTIC}
    coef_a = CoefficientField(ac_sub, ac_mat)
    rho_a = coef_a.require_positive("rho_a")
    c_speed = coef_a.require_positive("c")

    d_tags = set(config.dirichlet_tags())
    if INTERFACE_TAG in d_tags:
        raise ValidationError(f"boundary tag {INTERFACE_TAG} is reserved for the interface")
    p_dir = sorted(d_tags & {f.tag for f in poro_sub.boundary_faces()})
    a_dir = sorted(d_tags & {f.tag for f in ac_sub.boundary_faces()})
    for tag in p_dir:
        if config.boundary_datum(tag) is not None:
            raise ValidationError(
                "nonzero Dirichlet data on the poroelastic boundary is not supported")

    pen_e = penalty_spec(v_p, lam + 2.0 * mu, config.c_alpha)
    pen_p = penalty_spec(v_p, m_mod, config.c_alpha)
    pen_a = penalty_spec(v_a, rho_a, config.c_alpha)

    a_e = combine_dg_operator(
        assemble_volume_qf(v_p, (lam, mu), "elastic", threads),
        *assemble_faces(v_p, (lam, mu), pen_e, "elastic", p_dir))
    a_p = combine_dg_operator(
        assemble_volume_qf(v_p, m_mod, "divdiv", threads),
        *assemble_faces(v_p, m_mod, pen_p, "poro_pressure", p_dir))
    a_a = combine_dg_operator(
        assemble_volume_qf(v_a, rho_a, "stiffness", threads),
        *assemble_faces(v_a, rho_a, pen_a, "scalar", a_dir))

    nb = v_p.nbases
    d_beta = sp.diags(np.concatenate([np.repeat(beta[e], 2 * nb[e])
                                      for e in range(poro_sub.num_elements)])).tocsr()

    m_rho = assemble_volume_qf(v_p, rho_p, "mass", threads)
    m_rhof = assemble_volume_qf(v_p, rho_f, "mass", threads)
    m_rhow = assemble_volume_qf(v_p, rho_w, "mass", threads)
    m_ac = assemble_volume_qf(v_a, rho_a / c_speed ** 2, "mass", threads)
    b_damp = assemble_volume_qf(v_p, eta_over_k, "mass", threads)

    pairs = _match_interface_faces(poro_sub, p_verts, ac_sub, a_verts)
    rho_a_face = {af: rho_a[ac_sub.faces[af].owner] for _, af in pairs}
    c_p, c_a = interface_coupling_matrices(v_p, v_a, pairs,
                                           rho_a_face if rho_a_face else 1.0)

    k_mat = sp.bmat([
        [a_e + d_beta @ a_p @ d_beta, d_beta @ a_p, None],
        [a_p @ d_beta, a_p, None],
        [None, None, a_a],
    ], format="csr")
    m_mat = sp.bmat([
        [m_rho, m_rhof, None],
        [m_rhof, m_rhow, None],
        [None, None, m_ac],
    ], format="csr")
    zero_pp = sp.csr_matrix((v_p.ndof, v_p.ndof))
    c_mat = sp.bmat([
        [zero_pp, None, c_p],
        [None, b_damp, c_p],
        [c_a, c_a, None],
    ], format="csr")

    sources = config.source if isinstance(config.source, dict) else {}
    if config.source is not None and not isinstance(config.source, dict):
        raise ValidationError(
            "poroelastoacoustic sources must be a dict with keys "
            "'poroelastic', 'filtration', 'acoustic'")
    acoustic_data = {tag: config.boundary_datum(tag) for tag in a_dir}
    rhs_poro = RhsAssembler(v_p, physics="elastic")
    rhs_ac = RhsAssembler(v_a, rho_a, pen_a, a_dir, "scalar", volume_weight=rho_a)

    blocks = {
        "A_e": a_e, "A_p": a_p, "A_a": a_a, "D_beta": d_beta,
        "M_rho": m_rho, "M_rhof": m_rhof, "M_rhow": m_rhow, "M_a": m_ac,
        "B": b_damp, "C_p": c_p, "C_a": c_a,
    }
    return PoroAcousticSystem(
        poro_space=v_p, acoustic_space=v_a,
        poro_parent=p_parent, acoustic_parent=a_parent,
        mass=m_mat, damping=c_mat, stiffness=k_mat, blocks=blocks,
        rhs_poro=rhs_poro, rhs_acoustic=rhs_ac,
        acoustic_data=acoustic_data, sources=sources)


def _match_interface_faces(poro_sub, p_verts, ac_sub, a_verts):
    def face_map(sub, verts):
        out = {}
        for idx, f in enumerate(sub.faces):
            if f.is_boundary and f.tag == INTERFACE_TAG:
                a, b = (int(verts[f.vertices[0]]), int(verts[f.vertices[1]]))
                out[(min(a, b), max(a, b))] = idx
        return out

    pmap = face_map(poro_sub, p_verts)
    amap = face_map(ac_sub, a_verts)
    if set(pmap) != set(amap):
        raise ValidationError(
            "interface faces are not shared between the poroelastic and acoustic submeshes")
    return [(pmap[key], amap[key]) for key in sorted(pmap)]


@dataclass
class PoroAcousticResult:
    system: PoroAcousticSystem
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)      # full block vectors U
    rates: list = field(default_factory=list)       # full block vectors U'

    def split_last(self):
        return self.system.split(self.states[-1])


def solve_poroelastoacoustic(config: DGConfig, threads: int = 1) -> PoroAcousticResult:
    """Newmark integration (acceleration form) of the damped coupled system."""
    if config.time is None:
        raise ValidationError("poroelastoacoustic solver needs a time block")
    system = assemble_poroelastoacoustic(config, threads)
    tc = config.time

    u0 = _initial_state(system, config.initial)
    v0 = _initial_state(system, config.initial_velocity)

    stepper = NewmarkStepper(system.mass, system.stiffness, tc.dt,
                             damping=system.damping,
                             beta=tc.newmark_beta, gamma=tc.newmark_gamma)
    a = stepper.initial_acceleration(u0, v0, system.load(0.0))

    result = PoroAcousticResult(system=system)
    stride = max(1, config.output.stride)
    result.times.append(0.0)
    result.states.append(u0.copy())
    result.rates.append(v0.copy())
    u, v = u0, v0
    nsteps = tc.num_steps
    for n in range(1, nsteps + 1):
        u, v, a = stepper.step(u, v, a, system.load(n * tc.dt))
        if n % stride == 0 or n == nsteps:
            result.times.append(n * tc.dt)
            result.states.append(u.copy())
            result.rates.append(v.copy())
    return result


def _initial_state(system: PoroAcousticSystem, spec: Optional[dict]) -> np.ndarray:
    u = np.zeros(system.ndof)
    if not spec:
        return u
    if not isinstance(spec, dict):
        raise ValidationError("coupled initial data must be a dict of field callables")
    np_ = system.ndof_p
    if spec.get("u_p") is not None:
        u[:np_] = l2_project(system.poro_space, spec["u_p"])
    if spec.get("u_f") is not None:
        u[np_:2 * np_] = l2_project(system.poro_space, spec["u_f"])
    if spec.get("phi") is not None:
        u[2 * np_:] = l2_project(system.acoustic_space, spec["phi"])
    return u
