"""Total variation, perimeter and p-Laplacian estimates on triangulated surfaces."""

__version__ = "0.1.0"

from .errors import DomainError, NumericError, ParameterError, TVManifoldError
from .fields import FaceVectorField, Region, ScalarField, total_gradient_norm
from .mesh import Mesh, build_disk, build_flat_torus, build_icosphere

__all__ = [
    "DomainError",
    "FaceVectorField",
    "Mesh",
    "NumericError",
    "ParameterError",
    "Region",
    "ScalarField",
    "TVManifoldError",
    "__version__",
    "build_disk",
    "build_flat_torus",
    "build_icosphere",
    "total_gradient_norm",
]
