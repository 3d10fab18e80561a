"""Binding strategies that tie Gaussians to mesh triangles.

Four modes:

* ``shape-aware``: attributes live in the triangle's local frame; global
  scale and position are additionally rescaled per-axis by the triangle's
  adaption vector (times the ``beta`` gain), so splats stretch with the
  triangle.
* ``shape-aware-no-adaption``: same local frame, no edge-length rescaling.
* ``on-mesh-flat``: splats are squashed onto the face (thickness ``eps``
  along the normal, in-plane position and rotation only).
* ``mesh-offset``: splats sit at their barycentric anchor plus a learned
  world-space offset that does NOT follow deformations.

Manipulation transfer is a recompute: local attributes stay untouched and
the global parameters are re-derived from the deformed mesh's frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quaternions as quat
from .errors import ConfigError, DegenerateFaceError, TopologyError
from .gaussians import GlobalGaussians, GlobalGrads, logit, sh_coeff_count, sigmoid
from .geometry import FrameSet, TriMesh, compute_frames, validate_correspondence

MODES = ("shape-aware", "shape-aware-no-adaption", "on-mesh-flat", "mesh-offset")

# Paper-default anchor weights for three Gaussians per triangle.
BARYCENTRIC_N3 = np.array(
    [[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]], dtype=np.float64
)


def default_barycentric_set(n: int) -> np.ndarray:
    """Deterministic interior anchor weights for n Gaussians per triangle."""
    if n <= 0:
        raise ConfigError("need at least one Gaussian per triangle")
    if n == 3:
        return BARYCENTRIC_N3.copy()
    if n == 1:
        return np.full((1, 3), 1.0 / 3.0)
    # Golden-ratio lattice folded into the simplex interior.
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    k = np.arange(1, n + 1)
    u = np.mod(k * phi, 1.0)
    v = np.mod(k * phi * phi, 1.0)
    flip = u + v > 1.0
    u = np.where(flip, 1.0 - u, u)
    v = np.where(flip, 1.0 - v, v)
    w = np.stack([1.0 - u - v, u, v], axis=1)
    # Pull toward the centroid so anchors stay strictly interior.
    return 0.9 * w + 0.1 / 3.0


@dataclass
class BindingConfig:
    mode: str = "shape-aware"
    n_per_triangle: int = 3
    beta: float = 10.0
    barycentric: np.ndarray | None = None
    flat_thickness: float = 1e-4
    sh_degree: int = 2

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown binding mode {self.mode!r}; expected one of {MODES}")
        if self.n_per_triangle < 1:
            raise ConfigError("n_per_triangle must be >= 1")
        if self.beta <= 0:
            raise ConfigError("beta must be positive")
        if self.flat_thickness <= 0:
            raise ConfigError("flat_thickness must be positive")
        sh_coeff_count(self.sh_degree)
        if self.barycentric is None:
            self.barycentric = default_barycentric_set(self.n_per_triangle)
        self.barycentric = np.asarray(self.barycentric, dtype=np.float64)
        if self.barycentric.shape != (self.n_per_triangle, 3):
            raise ConfigError(
                f"barycentric set must be ({self.n_per_triangle},3), got {self.barycentric.shape}"
            )
        if np.any(self.barycentric < 0) or not np.allclose(self.barycentric.sum(axis=1), 1.0):
            raise ConfigError("barycentric weights must be nonnegative and sum to 1")


@dataclass
class LocalGaussians:
    """Per-triangle Gaussian attributes in local triangle space.

    Gaussians are ordered face-major: each bound face contributes
    ``n_per_triangle`` consecutive entries, so entry ``i`` uses anchor weight
    row ``i % n_per_triangle`` of the binding config.  ``local_positions`` is
    the local mean for the shape-aware modes, the in-plane offset for
    ``on-mesh-flat``, and the world-space offset for ``mesh-offset``.
    """

    tri_indices: np.ndarray      # (N,) int
    local_positions: np.ndarray  # (N,3)
    local_quats: np.ndarray      # (N,4) raw
    local_log_scales: np.ndarray  # (N,3)
    opacity_logits: np.ndarray   # (N,)
    sh: np.ndarray               # (N,K,3)

    def __len__(self) -> int:
        return len(self.tri_indices)

    @property
    def sh_degree(self) -> int:
        return int(round(np.sqrt(self.sh.shape[1]))) - 1

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {
            "local_positions": self.local_positions,
            "local_quats": self.local_quats,
            "local_log_scales": self.local_log_scales,
            "opacity_logits": self.opacity_logits,
            "sh": self.sh,
        }

    def copy(self) -> "LocalGaussians":
        return LocalGaussians(
            tri_indices=self.tri_indices.copy(),
            **{k: v.copy() for k, v in self.param_arrays().items()},
        )


@dataclass
class LocalGrads:
    local_positions: np.ndarray
    local_quats: np.ndarray
    local_log_scales: np.ndarray
    opacity_logits: np.ndarray
    sh: np.ndarray


@dataclass
class BindingCache:
    """Intermediates of to_global, reused by the backward pass."""

    gaussians: LocalGaussians
    cfg: BindingConfig
    frame_rot: np.ndarray   # (N,3,3) per-gaussian triangle rotation
    frame_quat: np.ndarray  # (N,4)
    adaption: np.ndarray    # (N,3)
    local_quat_eff: np.ndarray  # (N,4) effective (possibly constrained) raw local quat


def _anchor_points(local: LocalGaussians, mesh: TriMesh, cfg: BindingConfig) -> np.ndarray:
    """World anchor w1*v1 + w2*v2 + w3*v3 for each Gaussian."""
    corners = mesh.vertices[mesh.faces[local.tri_indices]]  # (N,3,3)
    sub = np.arange(len(local)) % cfg.n_per_triangle
    weights = cfg.barycentric[sub]  # (N,3)
    return np.einsum("nc,ncd->nd", weights, corners)


def init_binding(
    mesh: TriMesh, cfg: BindingConfig, frames: FrameSet | None = None
) -> LocalGaussians:
    """Bind cfg.n_per_triangle Gaussians to every non-degenerate face.

    Initial world positions sit at the configured barycentric anchors; local
    rotations are identity; scales give an isotropic world footprint of one
    third of the face's mean edge length; opacity starts at 0.1 and color at
    mid-gray.
    """
    if mesh.num_faces == 0:
        raise TopologyError("cannot bind Gaussians to an empty mesh")
    if frames is None:
        frames = compute_frames(mesh)
    valid = np.flatnonzero(~frames.degenerate)
    if len(valid) == 0:
        raise DegenerateFaceError("mesh has no non-degenerate faces to bind to")

    n_per = cfg.n_per_triangle
    tri = np.repeat(valid, n_per)
    n = len(tri)
    sub = np.tile(np.arange(n_per), len(valid))
    weights = cfg.barycentric[sub]
    corners = mesh.vertices[mesh.faces[tri]]
    world = np.einsum("nc,ncd->nd", weights, corners)

    rot = frames.rotations[tri]
    centroid = frames.centroids[tri]
    adaption = frames.adaptions[tri]
    in_frame = np.einsum("nji,nj->ni", rot, world - centroid)  # R^T (p - centroid)

    sigma = frames.edge_lengths[tri].mean(axis=1) / 3.0
    if cfg.mode == "shape-aware":
        local_pos = in_frame / adaption
        log_scales = np.log(sigma[:, None] / (cfg.beta * adaption))
    elif cfg.mode == "shape-aware-no-adaption":
        local_pos = in_frame
        log_scales = np.tile(np.log(sigma)[:, None], (1, 3))
    elif cfg.mode == "on-mesh-flat":
        local_pos = in_frame
        local_pos[:, 1] = 0.0  # anchors already lie on the face; pin exactly
        log_scales = np.tile(np.log(sigma)[:, None], (1, 3))
    else:  # mesh-offset: anchor + learned world offset, offset starts at zero
        local_pos = np.zeros((n, 3))
        log_scales = np.tile(np.log(sigma)[:, None], (1, 3))

    quats = np.zeros((n, 4))
    quats[:, 0] = 1.0
    return LocalGaussians(
        tri_indices=tri,
        local_positions=local_pos,
        local_quats=quats,
        local_log_scales=log_scales,
        opacity_logits=np.full(n, logit(0.1)),
        sh=np.zeros((n, sh_coeff_count(cfg.sh_degree), 3)),
    )


def to_global_with_cache(
    local: LocalGaussians,
    mesh: TriMesh,
    cfg: BindingConfig,
    frames: FrameSet | None = None,
) -> tuple[GlobalGaussians, BindingCache]:
    if frames is None:
        frames = compute_frames(mesh)
    tri = local.tri_indices
    if tri.size and tri.max() >= mesh.num_faces:
        raise TopologyError("tri_index exceeds face count of the mesh")
    if np.any(frames.degenerate[tri]):
        bad = tri[frames.degenerate[tri]][0]
        raise DegenerateFaceError(f"Gaussian bound to degenerate face {bad}")

    rot = frames.rotations[tri]          # (N,3,3)
    centroid = frames.centroids[tri]
    adaption = frames.adaptions[tri]
    frame_quat = quat.from_matrix(rot)

    raw_q = local.local_quats
    if cfg.mode == "on-mesh-flat":
        # In-plane rotation only: quaternion constrained to the normal axis.
        raw_q = raw_q * np.array([1.0, 0.0, 1.0, 0.0])
    unit_q = quat.normalize(raw_q)
    quats = quat.multiply(frame_quat, unit_q)

    scales_local = np.exp(local.local_log_scales)
    if cfg.mode == "shape-aware":
        means = np.einsum("nij,nj->ni", rot, adaption * local.local_positions) + centroid
        scales = cfg.beta * adaption * scales_local
    elif cfg.mode == "shape-aware-no-adaption":
        means = np.einsum("nij,nj->ni", rot, local.local_positions) + centroid
        scales = scales_local
    elif cfg.mode == "on-mesh-flat":
        planar = local.local_positions * np.array([1.0, 0.0, 1.0])
        means = np.einsum("nij,nj->ni", rot, planar) + centroid
        scales = scales_local.copy()
        scales[:, 1] = cfg.flat_thickness
    else:  # mesh-offset
        means = _anchor_points(local, mesh, cfg) + local.local_positions
        scales = scales_local

    out = GlobalGaussians(
        means=means,
        quats=quats,
        scales=scales,
        opacities=sigmoid(local.opacity_logits),
        sh=local.sh.copy(),
        normals=frames.normals[tri].copy(),
    )
    cache = BindingCache(
        gaussians=local,
        cfg=cfg,
        frame_rot=rot,
        frame_quat=frame_quat,
        adaption=adaption,
        local_quat_eff=raw_q,
    )
    return out, cache


def to_global(
    local: LocalGaussians,
    mesh: TriMesh,
    cfg: BindingConfig,
    frames: FrameSet | None = None,
) -> GlobalGaussians:
    """World-space Gaussians from local attributes and the mesh's frames."""
    return to_global_with_cache(local, mesh, cfg, frames)[0]


def to_global_backward(cache: BindingCache, g: GlobalGrads) -> LocalGrads:
    """Chain gradients on global (activated) parameters to raw local arrays.

    Gradients on the bound normal are dropped: it is the triangle's normal,
    not a learnable attribute.
    """
    local, cfg = cache.gaussians, cache.cfg
    rot, adaption = cache.frame_rot, cache.adaption

    rot_t_gmean = np.einsum("nji,nj->ni", rot, g.means)
    scales_local = np.exp(local.local_log_scales)
    if cfg.mode == "shape-aware":
        d_pos = adaption * rot_t_gmean
        d_log_scales = g.scales * (cfg.beta * adaption * scales_local)
    elif cfg.mode == "shape-aware-no-adaption":
        d_pos = rot_t_gmean
        d_log_scales = g.scales * scales_local
    elif cfg.mode == "on-mesh-flat":
        d_pos = rot_t_gmean * np.array([1.0, 0.0, 1.0])
        d_log_scales = g.scales * scales_local
        d_log_scales[:, 1] = 0.0
    else:  # mesh-offset
        d_pos = g.means.copy()
        d_log_scales = g.scales * scales_local

    d_unit_q = quat.multiply_backward_right(cache.frame_quat, g.quats)
    d_raw_q = quat.normalize_backward(cache.local_quat_eff, d_unit_q)
    if cfg.mode == "on-mesh-flat":
        d_raw_q = d_raw_q * np.array([1.0, 0.0, 1.0, 0.0])

    opac = sigmoid(local.opacity_logits)
    return LocalGrads(
        local_positions=d_pos,
        local_quats=d_raw_q,
        local_log_scales=d_log_scales,
        opacity_logits=g.opacities * opac * (1.0 - opac),
        sh=g.sh.copy(),
    )


def adapt_all(
    local: LocalGaussians,
    deformed_mesh: TriMesh,
    cfg: BindingConfig,
    original_mesh: TriMesh | None = None,
) -> GlobalGaussians:
    """Recompute world-space Gaussians on a deformed copy of the mesh.

    Local storage is read-only here; this is the whole manipulation-transfer
    step, so deformed meshes re-render without any retraining.
    """
    if original_mesh is not None and not validate_correspondence(original_mesh, deformed_mesh):
        raise TopologyError("deformed mesh does not share topology with the original")
    return to_global(local, deformed_mesh, cfg)
