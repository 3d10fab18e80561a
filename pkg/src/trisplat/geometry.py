"""Triangle-mesh data model, per-face local frames, and synthetic deformers.

A triangle's local frame has its first axis along the first edge, its second
axis along the face normal, and its third axis perpendicular to both.  The
per-face adaption vector rescales bound Gaussians when edge lengths change, so
splats track the triangle's shape under deformation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFaceError, InvalidTriangleError, TopologyError

# Faces with squared-area-scale cross products below this are degenerate.
EPS_AREA = 1e-12


@dataclass
class TriMesh:
    """Indexed triangle mesh: vertices (K,3) float64, faces (M,3) int."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise TopologyError(f"vertices must be (K,3), got {self.vertices.shape}")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise TopologyError(f"faces must be (M,3), got {self.faces.shape}")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise TopologyError("face index out of range")

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    def face_corners(self):
        """Vertex positions per face, shape (M, 3 corners, 3)."""
        return self.vertices[self.faces]

    def edge_lengths(self) -> np.ndarray:
        """Per-face (l1, l2, l3) for edges v1->v2, v2->v3, v3->v1."""
        c = self.face_corners()
        e1 = np.linalg.norm(c[:, 1] - c[:, 0], axis=1)
        e2 = np.linalg.norm(c[:, 2] - c[:, 1], axis=1)
        e3 = np.linalg.norm(c[:, 0] - c[:, 2], axis=1)
        return np.stack([e1, e2, e3], axis=1)

    def face_areas(self) -> np.ndarray:
        c = self.face_corners()
        cross = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def degenerate_faces(self) -> np.ndarray:
        """Boolean mask of faces whose area is below the degeneracy threshold."""
        return self.face_areas() <= EPS_AREA

    def copy(self) -> "TriMesh":
        return TriMesh(self.vertices.copy(), self.faces.copy())


@dataclass
class TriangleFrame:
    """Orthonormal frame of one triangle plus its shape descriptors.

    rotation columns are (edge1 direction, normal, edge1 x normal); adaption
    holds the per-axis scale factors derived from edge lengths.
    """

    rotation: np.ndarray      # (3,3), det +1
    centroid: np.ndarray      # (3,)
    normal: np.ndarray        # (3,), unit
    edge_lengths: np.ndarray  # (3,)
    adaption: np.ndarray      # (3,)


@dataclass
class FrameSet:
    """Frames of every face of a mesh, vectorized.

    Degenerate faces carry NaN rows and are flagged; callers must not bind
    Gaussians to them.
    """

    rotations: np.ndarray     # (M,3,3)
    centroids: np.ndarray     # (M,3)
    normals: np.ndarray       # (M,3)
    edge_lengths: np.ndarray  # (M,3)
    adaptions: np.ndarray     # (M,3)
    degenerate: np.ndarray    # (M,) bool

    def frame(self, face_index: int) -> TriangleFrame:
        if self.degenerate[face_index]:
            raise DegenerateFaceError(f"face {face_index} is degenerate")
        return TriangleFrame(
            rotation=self.rotations[face_index],
            centroid=self.centroids[face_index],
            normal=self.normals[face_index],
            edge_lengths=self.edge_lengths[face_index],
            adaption=self.adaptions[face_index],
        )


def compute_adaption(l1: float, l2: float, l3: float) -> np.ndarray:
    """Per-axis scale triple from edge lengths.

    Axis 1 follows the first edge, so it scales with l1.  Axis 3 spans the
    triangle away from that edge, scaling with the mean of the other two
    edges.  Axis 2 (the normal) takes the mean of the other two factors.
    """
    if l1 <= 0 or l2 <= 0 or l3 <= 0:
        raise InvalidTriangleError(f"edge lengths must be positive, got ({l1}, {l2}, {l3})")
    e1 = l1
    e3 = 0.5 * (l2 + l3)
    e2 = 0.5 * (e1 + e3)
    return np.array([e1, e2, e3], dtype=np.float64)


def compute_frames(mesh: TriMesh) -> FrameSet:
    """Local frames for all faces at once."""
    c = mesh.face_corners()
    edge1 = c[:, 1] - c[:, 0]
    cross = np.cross(edge1, c[:, 2] - c[:, 0])
    cross_norm = np.linalg.norm(cross, axis=1)
    degenerate = 0.5 * cross_norm <= EPS_AREA

    safe = np.where(degenerate[:, None], 1.0, cross_norm[:, None])
    normals = cross / safe
    e1_len = np.linalg.norm(edge1, axis=1)
    r1 = edge1 / np.where(degenerate[:, None], 1.0, e1_len[:, None])
    r3 = np.cross(r1, normals)
    rotations = np.stack([r1, normals, r3], axis=2)  # columns

    lengths = mesh.edge_lengths()
    e1 = lengths[:, 0]
    e3 = 0.5 * (lengths[:, 1] + lengths[:, 2])
    adaptions = np.stack([e1, 0.5 * (e1 + e3), e3], axis=1)

    rotations[degenerate] = np.nan
    normals = normals.copy()
    normals[degenerate] = np.nan
    adaptions[degenerate] = np.nan

    return FrameSet(
        rotations=rotations,
        centroids=c.mean(axis=1),
        normals=normals,
        edge_lengths=lengths,
        adaptions=adaptions,
        degenerate=degenerate,
    )


def compute_frame(mesh: TriMesh, face_index: int) -> TriangleFrame:
    """Local frame of a single face; raises on degenerate faces."""
    if not 0 <= face_index < mesh.num_faces:
        raise IndexError(f"face index {face_index} out of range [0, {mesh.num_faces})")
    v1, v2, v3 = mesh.vertices[mesh.faces[face_index]]
    edge1 = v2 - v1
    cross = np.cross(edge1, v3 - v1)
    cross_norm = float(np.linalg.norm(cross))
    if 0.5 * cross_norm <= EPS_AREA:
        raise DegenerateFaceError(f"face {face_index} has colinear vertices")
    normal = cross / cross_norm
    r1 = edge1 / np.linalg.norm(edge1)
    rotation = np.stack([r1, normal, np.cross(r1, normal)], axis=1)
    lengths = np.array([
        np.linalg.norm(v2 - v1),
        np.linalg.norm(v3 - v2),
        np.linalg.norm(v1 - v3),
    ])
    return TriangleFrame(
        rotation=rotation,
        centroid=(v1 + v2 + v3) / 3.0,
        normal=normal,
        edge_lengths=lengths,
        adaption=compute_adaption(*lengths),
    )


# --- synthetic deformers ---------------------------------------------------
#
# Stand-ins for DCC mesh edits: each produces a same-topology copy with only
# vertex positions changed, which is exactly what the self-adaptation step
# consumes.


@dataclass
class Rigid:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return v @ np.asarray(self.rotation, dtype=np.float64).T + np.asarray(
            self.translation, dtype=np.float64
        )


@dataclass
class UniformScale:
    factor: float

    def __call__(self, v: np.ndarray) -> np.ndarray:
        if self.factor <= 0:
            raise InvalidTriangleError("scale factor must be positive")
        return v * self.factor


@dataclass
class Stretch:
    """Scale a single axis about the bounding-box center."""

    axis: int
    factor: float

    def __call__(self, v: np.ndarray) -> np.ndarray:
        center = 0.5 * (v.min(axis=0) + v.max(axis=0))
        out = v.copy()
        out[:, self.axis] = center[self.axis] + self.factor * (v[:, self.axis] - center[self.axis])
        return out


@dataclass
class Taper:
    """Linearly scale the cross-section from 1 at the axis minimum to
    `factor` at the maximum."""

    axis: int
    factor: float

    def __call__(self, v: np.ndarray) -> np.ndarray:
        lo, hi = v[:, self.axis].min(), v[:, self.axis].max()
        span = hi - lo if hi > lo else 1.0
        t = (v[:, self.axis] - lo) / span
        scale = 1.0 + (self.factor - 1.0) * t
        center = 0.5 * (v.min(axis=0) + v.max(axis=0))
        out = v.copy()
        others = [a for a in range(3) if a != self.axis]
        for a in others:
            out[:, a] = center[a] + scale * (v[:, a] - center[a])
        return out


@dataclass
class Bend:
    """Progressively rotate cross-sections about the next axis, by `angle`
    radians at the far end of `axis`."""

    axis: int
    angle: float

    def __call__(self, v: np.ndarray) -> np.ndarray:
        lo, hi = v[:, self.axis].min(), v[:, self.axis].max()
        span = hi - lo if hi > lo else 1.0
        t = (v[:, self.axis] - lo) / span
        theta = self.angle * t
        pivot = 0.5 * (v.min(axis=0) + v.max(axis=0))
        rot_axis = (self.axis + 1) % 3
        a, b = [x for x in range(3) if x != rot_axis]
        rel = v - pivot
        out = rel.copy()
        out[:, a] = np.cos(theta) * rel[:, a] - np.sin(theta) * rel[:, b]
        out[:, b] = np.sin(theta) * rel[:, a] + np.cos(theta) * rel[:, b]
        return out + pivot


@dataclass
class ReplaceVertices:
    vertices: np.ndarray

    def __call__(self, v: np.ndarray) -> np.ndarray:
        new = np.asarray(self.vertices, dtype=np.float64)
        if new.shape != v.shape:
            raise TopologyError(
                f"replacement vertex count {new.shape} does not match mesh {v.shape}"
            )
        return new


Deformation = Rigid | UniformScale | Stretch | Taper | Bend | ReplaceVertices


def apply_deformation(mesh: TriMesh, deformation: Deformation) -> TriMesh:
    """Same-topology copy of the mesh with deformed vertex positions."""
    return TriMesh(deformation(mesh.vertices), mesh.faces.copy())


def validate_correspondence(a: TriMesh, b: TriMesh) -> bool:
    """True iff the two meshes share vertex count and an identical face list."""
    return a.num_vertices == b.num_vertices and np.array_equal(a.faces, b.faces)
