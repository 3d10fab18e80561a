"""Mesh extraction from Gaussian point sets.

Occupancy is a ball query: a grid sample is occupied iff some input point
lies within Euclidean distance tau of it.  The surface of the resulting
binary field is then pulled out with marching cubes; oriented points
(positions + normals) can be exported instead for external screened-Poisson
reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from skimage import measure

from .errors import InvalidTriangleError, TriSplatError
from .gaussians import FreeGaussians
from .geometry import TriMesh

DEFAULT_TAU = 0.01
DEFAULT_RESOLUTION = 64
DEFAULT_ISO = 1e-4


@dataclass
class OccupancyGrid:
    """Binary samples on a regular lattice: sample (i,j,k) sits at
    origin + (i,j,k) * cell_size."""

    values: np.ndarray     # (rx,ry,rz) uint8 in {0,1}
    origin: np.ndarray     # (3,)
    cell_size: np.ndarray  # (3,)

    @property
    def resolution(self) -> tuple[int, int, int]:
        return self.values.shape

    def sample_positions(self) -> np.ndarray:
        """World positions of all samples, shape (rx,ry,rz,3)."""
        axes = [self.origin[d] + np.arange(self.values.shape[d]) * self.cell_size[d] for d in range(3)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack(grid, axis=-1)


@dataclass
class OrientedPointSet:
    positions: np.ndarray  # (N,3)
    normals: np.ndarray    # (N,3), unit


def build_occupancy(
    points: np.ndarray,
    resolution: int = DEFAULT_RESOLUTION,
    tau: float = DEFAULT_TAU,
    bounds: tuple[np.ndarray, np.ndarray] | None = None,
) -> OccupancyGrid:
    """Ball-query occupancy of a point set on a resolution^3 lattice.

    Bounds default to the point bounding box padded by tau plus one cell, so
    occupied samples never touch the grid boundary and extracted surfaces
    close.  Each point stamps the samples within tau of it (the dual of
    querying each sample against a tau-cell spatial hash of the points), so
    cost is O(#points * stamp + #samples).
    """
    if resolution < 8:
        raise ValueError("resolution must be >= 8 per axis")
    if tau <= 0:
        raise ValueError("tau must be positive")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)

    if bounds is None:
        if len(points) == 0:
            lo = np.zeros(3)
            hi = np.ones(3)
        else:
            pmin = points.min(axis=0)
            pmax = points.max(axis=0)
            cell0 = (pmax - pmin + 2.0 * tau) / (resolution - 1)
            cell0 = np.maximum(cell0, 1e-12)
            lo = pmin - tau - cell0
            hi = pmax + tau + cell0
    else:
        lo = np.asarray(bounds[0], dtype=np.float64)
        hi = np.asarray(bounds[1], dtype=np.float64)
    cell = (hi - lo) / (resolution - 1)
    cell = np.maximum(cell, 1e-12)

    values = np.zeros((resolution,) * 3, dtype=np.uint8)
    if len(points) == 0:
        return OccupancyGrid(values=values, origin=lo, cell_size=cell)

    base = np.floor((points - lo) / cell).astype(np.int64)
    reach = np.ceil(tau / cell).astype(np.int64) + 1
    tau2 = tau * tau
    offsets = np.stack(
        np.meshgrid(*[np.arange(-reach[d], reach[d] + 1) for d in range(3)], indexing="ij"),
        axis=-1,
    ).reshape(-1, 3)
    for off in offsets:
        idx = base + off
        ok = np.all((idx >= 0) & (idx < resolution), axis=1)
        if not ok.any():
            continue
        node_pos = lo + idx[ok] * cell
        d2 = np.sum((node_pos - points[ok]) ** 2, axis=1)
        hit = idx[ok][d2 <= tau2]
        values[hit[:, 0], hit[:, 1], hit[:, 2]] = 1
    return OccupancyGrid(values=values, origin=lo, cell_size=cell)


def brute_force_occupancy(points, grid: OccupancyGrid, tau: float) -> np.ndarray:
    """Reference O(samples * points) evaluation of the same predicate."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    samples = grid.sample_positions().reshape(-1, 3)
    out = np.zeros(len(samples), dtype=np.uint8)
    if len(points):
        for start in range(0, len(samples), 8192):
            block = samples[start : start + 8192]
            d2 = ((block[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
            out[start : start + 8192] = (d2.min(axis=1) <= tau * tau).astype(np.uint8)
    return out.reshape(grid.values.shape)


def marching_cube(
    grid: OccupancyGrid, iso: float = DEFAULT_ISO, placement: str = "midpoint"
) -> TriMesh:
    """Extract the occupancy isosurface as a triangle mesh.

    With a binary field, linear interpolation at an extreme iso value pins
    vertices (almost) onto lattice nodes; the default "midpoint" placement
    puts them halfway along crossing edges instead.  Faces are wound so
    right-hand normals point out of the occupied region.
    """
    if not 0.0 < iso < 1.0:
        raise ValueError("iso must lie in (0,1)")
    if placement not in ("midpoint", "interp"):
        raise ValueError("placement must be 'midpoint' or 'interp'")
    vol = grid.values
    if vol.min() == vol.max():
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    level = 0.5 if placement == "midpoint" else iso
    verts, faces, _, _ = measure.marching_cubes(vol.astype(np.float64), level=level)
    world = grid.origin + verts * grid.cell_size
    mesh = TriMesh(world, faces.astype(np.int64))
    if _signed_volume(mesh) < 0:
        mesh = TriMesh(mesh.vertices, mesh.faces[:, ::-1].copy())
    return mesh


def _signed_volume(mesh: TriMesh) -> float:
    c = mesh.face_corners()
    return float(np.einsum("ni,ni->", c[:, 0], np.cross(c[:, 1], c[:, 2]))) / 6.0


def export_oriented_points(gaussians: FreeGaussians) -> OrientedPointSet:
    """Positions plus unit normals, the input to screened-Poisson tools."""
    if len(gaussians) == 0:
        raise TriSplatError("no Gaussians to export")
    norms = np.linalg.norm(gaussians.normals, axis=1)
    if np.any(norms < 1e-12):
        raise InvalidTriangleError("some Gaussians are missing a usable normal")
    return OrientedPointSet(
        positions=gaussians.positions.copy(),
        normals=gaussians.normals / norms[:, None],
    )
