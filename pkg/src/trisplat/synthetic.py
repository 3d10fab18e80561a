"""Procedural test scenes: icosphere meshes, camera rigs, a textured
reference Gaussian scene, silhouette rasterization of meshes, and on-disk
dataset generation for end-to-end runs."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import fileio, render
from .binding import BindingConfig, LocalGaussians, init_binding, to_global
from .camera import Camera, look_at
from .fit import BoundScene, TrainView
from .gaussians import logit
from .geometry import TriMesh


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> TriMesh:
    """Subdivided icosahedron; 20 * 4^subdivisions faces."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)

    for _ in range(subdivisions):
        edge_mid: dict[tuple[int, int], int] = {}
        new_verts = list(verts)

        def midpoint(a: int, b: int) -> int:
            key = (min(a, b), max(a, b))
            if key not in edge_mid:
                m = new_verts[a] + new_verts[b]
                m = m / np.linalg.norm(m)
                edge_mid[key] = len(new_verts)
                new_verts.append(m)
            return edge_mid[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
        verts = np.array(new_verts)
        faces = np.array(new_faces, dtype=np.int64)

    return TriMesh(verts * radius, faces)


def camera_ring(
    n: int = 16,
    distance: float = 3.0,
    width: int = 128,
    height: int = 128,
    fov_x: float = 0.8,
    elevations=(0.35, -0.2),
) -> list[Camera]:
    """Cameras on tilted rings around the origin, all looking at it."""
    cams = []
    for i in range(n):
        angle = 2.0 * np.pi * i / n
        elev = elevations[i % len(elevations)]
        eye = distance * np.array(
            [np.cos(angle) * np.cos(elev), np.sin(angle) * np.cos(elev), np.sin(elev)]
        )
        cams.append(look_at(eye, (0, 0, 0), width=width, height=height, fov_x=fov_x))
    return cams


def reference_scene(
    mesh: TriMesh, cfg: BindingConfig, seed: int = 0
) -> BoundScene:
    """A bound scene with procedural striped colors, high opacity, and small
    local jitter; the 'ground truth' that toy fits try to recover."""
    rng = np.random.default_rng(seed)
    local = init_binding(mesh, cfg)
    g = to_global(local, mesh, cfg)

    pos = g.means
    stripes = (
        0.5
        + 0.30 * np.sin(4.0 * pos[:, 0] + 1.0)
        + 0.15 * np.cos(6.0 * pos[:, 1])
    )
    color = np.stack(
        [
            np.clip(stripes, 0.08, 0.92),
            np.clip(0.5 + 0.35 * np.sin(5.0 * pos[:, 2]), 0.08, 0.92),
            np.clip(0.5 + 0.25 * np.cos(3.0 * (pos[:, 0] + pos[:, 2])), 0.08, 0.92),
        ],
        axis=1,
    )
    from .sh import C0

    local.sh[:, 0, :] = (color - 0.5) / C0
    if local.sh.shape[1] > 1:
        local.sh[:, 1:4, :] = 0.06 * rng.standard_normal((len(local), 3, 3))
    local.opacity_logits[:] = logit(0.93)
    local.local_log_scales += rng.normal(0.0, 0.12, local.local_log_scales.shape)
    if cfg.mode in ("shape-aware", "shape-aware-no-adaption"):
        local.local_positions += rng.normal(0.0, 0.02, local.local_positions.shape)
    return BoundScene(mesh=mesh, config=cfg, gaussians=local)


def render_views(
    scene: BoundScene, cameras: list[Camera], background=(0.0, 0.0, 0.0)
) -> list[TrainView]:
    """Ground-truth views of a scene: rendered color plus alpha>0.5 masks."""
    views = []
    g = to_global(scene.gaussians, scene.mesh, scene.config)
    for cam in cameras:
        out = render.rasterize(g, cam, background)
        views.append(
            TrainView(
                image=np.clip(out.color, 0.0, 1.0),
                mask=(out.alpha > 0.5).astype(np.float64),
                camera=cam,
            )
        )
    return views


def perturb_vertices(mesh: TriMesh, fraction: float = 0.01, seed: int = 0) -> TriMesh:
    """Gaussian vertex noise with sigma = fraction * bbox diagonal."""
    rng = np.random.default_rng(seed)
    diag = float(np.linalg.norm(mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)))
    return TriMesh(
        mesh.vertices + rng.normal(0.0, fraction * diag, mesh.vertices.shape),
        mesh.faces.copy(),
    )


def mesh_silhouette(mesh: TriMesh, cam: Camera) -> np.ndarray:
    """Binary coverage mask of the projected mesh (deterministic, per pixel
    center, half-plane test per triangle).  Independent of the splatting path."""
    pts = cam.project_points(mesh.vertices)
    xy = pts[:, :2]
    z = pts[:, 2]
    mask = np.zeros((cam.height, cam.width), dtype=bool)
    for face in mesh.faces:
        if np.any(z[face] <= 0):
            continue
        tri = xy[face]
        lo = np.floor(tri.min(axis=0) - 0.5).astype(int)
        hi = np.ceil(tri.max(axis=0) + 0.5).astype(int)
        x0, y0 = np.maximum(lo, 0)
        x1 = min(hi[0] + 1, cam.width)
        y1 = min(hi[1] + 1, cam.height)
        if x0 >= x1 or y0 >= y1:
            continue
        xs = np.arange(x0, x1) + 0.5
        ys = np.arange(y0, y1) + 0.5
        px, py = np.meshgrid(xs, ys)
        (ax, ay), (bx, by), (cx2, cy2) = tri
        d1 = (px - bx) * (ay - by) - (py - by) * (ax - bx)
        d2 = (px - cx2) * (by - cy2) - (py - cy2) * (bx - cx2)
        d3 = (px - ax) * (cy2 - ay) - (py - ay) * (cx2 - ax)
        neg = (d1 < 0) | (d2 < 0) | (d3 < 0)
        pos = (d1 > 0) | (d2 > 0) | (d3 > 0)
        mask[y0:y1, x0:x1] |= ~(neg & pos)
    return mask


def silhouette_iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def write_dataset(
    directory,
    scene: BoundScene,
    cameras: list[Camera],
    background=(0.0, 0.0, 0.0),
) -> Path:
    """Materialize a fit-ready dataset: mesh, checkpoint, cameras, RGBA
    ground-truth images, and a bundle.json tying them together."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    fileio.write_obj(scene.mesh, directory / "mesh.obj")
    fileio.write_checkpoint(
        fileio.Checkpoint(gaussians=scene.gaussians, config=scene.config),
        directory / "reference.ply",
    )
    views = render_views(scene, cameras, background)
    file_paths = []
    for i, view in enumerate(views):
        name = f"gt_{i:04d}.png"
        rgba = np.concatenate([view.image, view.mask[..., None]], axis=2)
        fileio.write_image(rgba, directory / name)
        file_paths.append(name)
    fileio.write_camera_dataset(directory / "transforms.json", cameras, file_paths)
    import json

    with open(directory / "bundle.json", "w") as fh:
        json.dump(
            {
                "mesh": "mesh.obj",
                "checkpoint": "reference.ply",
                "cameras": "transforms.json",
                "background": list(np.asarray(background, dtype=float)),
            },
            fh,
            indent=1,
        )
    return directory / "bundle.json"
