"""Problem-definition dataclasses shared by the physics solvers."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .errors import ValidationError
from .mesh import PolyMesh

PHYSICS_NAMES = ("laplacian", "heat", "elastodynamics", "poroelastoacoustics")

#: boundary tag reserved for the poroelastic/acoustic coupling interface
INTERFACE_TAG = 0


@dataclass
class BoundaryCondition:
    kind: str                      # "dirichlet" | "neumann" | "interface"
    value: Optional[Callable] = None  # g(x, y, t); vector data returns (n, 2)

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann", "interface"):
            raise ValidationError(f"unknown boundary kind {self.kind!r}")


@dataclass
class TimeConfig:
    dt: float
    t_final: float
    theta: float = 0.5
    newmark_beta: float = 0.25
    newmark_gamma: float = 0.5

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValidationError("dt must be positive")
        if self.t_final < self.dt:
            raise ValidationError("final time must be at least one step")
        if not 0.0 <= self.theta <= 1.0:
            raise ValidationError("theta out of [0,1]")

    @property
    def num_steps(self) -> int:
        return int(round(self.t_final / self.dt))


@dataclass
class OutputConfig:
    directory: str = "."
    stride: int = 1
    formats: tuple = ("csv",)


@dataclass
class DGConfig:
    """Everything a solver run needs, independent of how it was loaded."""

    physics: str
    mesh: PolyMesh
    degree: int
    materials: dict
    boundaries: dict                      # tag -> BoundaryCondition
    c_alpha: float = 10.0
    source: Optional[Callable] = None     # f(x, y, t)
    point_source: Optional[object] = None
    exact: Optional[Callable] = None
    exact_grad: Optional[Callable] = None
    initial: Optional[Callable] = None
    initial_velocity: Optional[Callable] = None
    time: Optional[TimeConfig] = None
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        if self.physics not in PHYSICS_NAMES:
            raise ValidationError(f"unknown physics {self.physics!r}")
        if self.degree < 0:
            raise ValidationError("degree must be >= 0")
        if self.c_alpha <= 0.0:
            raise ValidationError("penalty constant must be positive")

    def with_mesh(self, mesh: PolyMesh, degree: Optional[int] = None) -> "DGConfig":
        return replace(self, mesh=mesh, degree=self.degree if degree is None else degree)

    def dirichlet_tags(self) -> list[int]:
        return [tag for tag, bc in self.boundaries.items() if bc.kind == "dirichlet"]

    def boundary_datum(self, tag: int):
        bc = self.boundaries.get(tag)
        return None if bc is None else bc.value
