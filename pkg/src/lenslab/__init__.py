"""lenslab: a numerical laboratory for geodesic scattering on manifolds with boundary."""

from .manifold import (
    BoundaryPoint,
    BoundaryVector,
    BumpProfile,
    FlatProduct,
    ManifoldSpec,
    PerturbedProduct,
    SurfaceOfRevolution,
    boundary_type,
    christoffel_at,
    metric_at,
)
from .config import PRESETS, parse_config, resolve_spec, spec_fingerprint

__version__ = "0.1.0"

__all__ = [
    "BoundaryPoint",
    "BoundaryVector",
    "BumpProfile",
    "FlatProduct",
    "ManifoldSpec",
    "PerturbedProduct",
    "SurfaceOfRevolution",
    "boundary_type",
    "christoffel_at",
    "metric_at",
    "PRESETS",
    "parse_config",
    "resolve_spec",
    "spec_fingerprint",
    "__version__",
]
