"""Problem definitions and solvers built on the DG assembly core."""

from .poisson import PoissonResult, solve_poisson
from .heat import solve_heat
from .elastodynamics import lame_from_speeds, solve_elastodynamics
from .poroelastoacoustic import (
    assemble_poroelastoacoustic,
    biot_derived_densities,
    solve_poroelastoacoustic,
)
from .sources import (
    DoubleCoupleSpec,
    SourceTimeFunction,
    double_couple_source,
    gaussian_wavelet,
    plane_wave_dirichlet,
    ricker_like,
)

__all__ = [
    "PoissonResult",
    "solve_poisson",
    "solve_heat",
    "solve_elastodynamics",
    "lame_from_speeds",
    "assemble_poroelastoacoustic",
    "biot_derived_densities",
    "solve_poroelastoacoustic",
    "SourceTimeFunction",
    "DoubleCoupleSpec",
    "double_couple_source",
    "gaussian_wavelet",
    "plane_wave_dirichlet",
    "ricker_like",
]
