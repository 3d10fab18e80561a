"""trisplat: triangle-mesh-bound 3D Gaussian splatting.

Gaussians live in per-triangle local frames; deforming the mesh re-poses
and re-scales every splat with no retraining.  Includes a deterministic
software rasterizer with analytic gradients, two-stage fitting, mesh
extraction from Gaussian point sets, and a CLI.
"""

from ._kernels import active_backend, available_backends
from .binding import BindingConfig, LocalGaussians, adapt_all, init_binding, to_global
from .camera import Camera, look_at
from .errors import TriSplatError
from .fit import BoundScene, FreeScene, LossWeights, TrainView, optimize
from .gaussians import FreeGaussians, GlobalGaussians, covariance
from .geometry import (
    TriMesh,
    TriangleFrame,
    apply_deformation,
    compute_adaption,
    compute_frame,
    compute_frames,
    validate_correspondence,
)
from .render import RenderOutput, pseudo_normal_from_depth, project, rasterize

__version__ = "0.1.0"

__all__ = [
    "BindingConfig",
    "BoundScene",
    "Camera",
    "FreeGaussians",
    "FreeScene",
    "GlobalGaussians",
    "LocalGaussians",
    "LossWeights",
    "RenderOutput",
    "TriMesh",
    "TrainView",
    "TriSplatError",
    "TriangleFrame",
    "active_backend",
    "adapt_all",
    "apply_deformation",
    "available_backends",
    "compute_adaption",
    "compute_frame",
    "compute_frames",
    "covariance",
    "init_binding",
    "look_at",
    "optimize",
    "project",
    "pseudo_normal_from_depth",
    "rasterize",
    "to_global",
    "validate_correspondence",
]
