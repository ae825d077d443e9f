"""Exception hierarchy; the CLI maps these onto exit codes."""


class PolyDGError(Exception):
    """Base class for all library errors."""


class ValidationError(PolyDGError):
    """Bad input: configs, meshes, parameter ranges (CLI exit code 1)."""


class NumericalError(PolyDGError):
    """Solver-stage failure: singular operators, failed factorizations (exit 2)."""


class MeshFormatError(ValidationError):
    """Malformed mesh file; message names the offending line."""


class NonManifoldError(ValidationError):
    """A face is referenced by more than two elements."""
