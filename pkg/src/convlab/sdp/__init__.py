"""Dense semidefinite programming: problem builder and ADMM solver."""

from .problem import (
    Affine,
    Block,
    FidelityBundle,
    Scalar,
    SdpProblem,
    fidelity_epigraph,
    from_coords,
    hmat,
    hvec,
    to_coords,
)
from .solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    SdpError,
    SdpSolution,
    available_backends,
    default_backend,
    solve,
)

__all__ = [
    "Affine",
    "Block",
    "FidelityBundle",
    "Scalar",
    "SdpError",
    "SdpProblem",
    "SdpSolution",
    "DEFAULT_MAX_ITER",
    "DEFAULT_TOL",
    "available_backends",
    "default_backend",
    "fidelity_epigraph",
    "from_coords",
    "hmat",
    "hvec",
    "solve",
    "to_coords",
]
