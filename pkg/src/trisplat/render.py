"""Deterministic tile-based splatting renderer with an analytic backward pass.

Forward: project 3D Gaussians to screen-space 2D Gaussians, sort globally by
camera depth (ties broken by input index), bin into 16x16 tiles from each
splat's 3-sigma bounding box, then alpha-composite every pixel front-to-back.
Color, camera-depth, world-normal, and accumulated-alpha channels are
composited with the same weights.

Backward: exact chain rule of that forward computation, down to means,
quaternions, scales, opacities, SH coefficients, and normals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import quaternions as quat
from . import sh as shlib
from .camera import NEAR_PLANE, Camera
from .gaussians import GlobalGaussians, GlobalGrads, covariance

TILE_SIZE = 16
COV2D_FLOOR = 0.3
# Mahalanobis radius enclosing 99% of a 2D Gaussian's mass.
CULL_RADIUS = float(np.sqrt(2.0 * np.log(100.0)))
BIN_RADIUS = 3.0


@dataclass
class ProjectedGaussians:
    """Screen-space splats; `culled` marks Gaussians that cannot contribute."""

    mean2d: np.ndarray   # (N,2) pixel coordinates
    cov2d: np.ndarray    # (N,2,2) with low-pass floor added
    conic: np.ndarray    # (N,3) = (inv00, inv01, inv11)
    depth: np.ndarray    # (N,) camera-space z
    color: np.ndarray    # (N,3) RGB from SH for this view
    opacity: np.ndarray  # (N,)
    radius: np.ndarray   # (N,) 3-sigma pixel radius
    culled: np.ndarray   # (N,) bool


@dataclass
class RenderOutput:
    color: np.ndarray   # (H,W,3), composited over background
    depth: np.ndarray   # (H,W)
    normal: np.ndarray  # (H,W,3)
    alpha: np.ndarray   # (H,W) accumulated transmittance weight


@dataclass
class _Cache:
    gaussians: GlobalGaussians
    cam: Camera
    background: np.ndarray
    backend: str | None
    visible: np.ndarray
    means_cam: np.ndarray
    jac: np.ndarray
    cov_cam: np.ndarray
    rot3: np.ndarray
    quats_unit: np.ndarray
    dirs_raw: np.ndarray
    dirs: np.ndarray
    proj: ProjectedGaussians
    order: np.ndarray
    tile_entries: np.ndarray
    tile_offsets: np.ndarray
    final_t: np.ndarray
    n_proc: np.ndarray


def project(gaussians: GlobalGaussians, cam: Camera) -> ProjectedGaussians:
    """Perspective-project Gaussians to screen space.

    A Gaussian is culled when its mean is behind the near plane or the
    99%-mass ellipse of its projection misses the image rectangle.
    """
    wr = cam.rotation
    means_cam = gaussians.means @ wr.T + cam.translation
    z = means_cam[:, 2]
    in_front = z > NEAR_PLANE
    zs = np.where(in_front, z, 1.0)
    x, y = means_cam[:, 0], means_cam[:, 1]

    mean2d = np.stack([cam.fx * x / zs + cam.cx, cam.fy * y / zs + cam.cy], axis=1)

    n = len(gaussians)
    jac = np.zeros((n, 2, 3))
    jac[:, 0, 0] = cam.fx / zs
    jac[:, 0, 2] = -cam.fx * x / (zs * zs)
    jac[:, 1, 1] = cam.fy / zs
    jac[:, 1, 2] = -cam.fy * y / (zs * zs)

    quats_unit = quat.normalize(gaussians.quats)
    rot3 = quat.to_matrix(quats_unit)
    cov3 = covariance(rot3, gaussians.scales)
    cov_cam = np.einsum("ij,njk,lk->nil", wr, cov3, wr)
    cov2d = np.einsum("nij,njk,nlk->nil", jac, cov_cam, jac)
    cov2d[:, 0, 0] += COV2D_FLOOR
    cov2d[:, 1, 1] += COV2D_FLOOR

    a, b, c = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
    det = a * c - b * b
    ok = det > 0
    det_s = np.where(ok, det, 1.0)
    conic = np.stack([c / det_s, -b / det_s, a / det_s], axis=1)
    lam_max = 0.5 * (a + c) + np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    sigma_max = np.sqrt(np.maximum(lam_max, 0.0))
    radius = BIN_RADIUS * sigma_max

    r_cull = CULL_RADIUS * sigma_max
    offscreen = (
        (mean2d[:, 0] + r_cull < 0.0)
        | (mean2d[:, 0] - r_cull > cam.width)
        | (mean2d[:, 1] + r_cull < 0.0)
        | (mean2d[:, 1] - r_cull > cam.height)
    )
    culled = (~in_front) | (~ok) | offscreen

    center = cam.center()
    dirs_raw = gaussians.means - center
    norms = np.maximum(np.linalg.norm(dirs_raw, axis=1, keepdims=True), 1e-12)
    dirs = dirs_raw / norms
    color = shlib.eval_sh(gaussians.sh, dirs)

    return ProjectedGaussians(
        mean2d=mean2d,
        cov2d=cov2d,
        conic=conic,
        depth=z,
        color=color,
        opacity=gaussians.opacities.copy(),
        radius=radius,
        culled=culled,
    )


def _bin_tiles(proj: ProjectedGaussians, order: np.ndarray, width: int, height: int):
    """Per-tile splat lists (indices into the depth-sorted arrays)."""
    ntx = (width + TILE_SIZE - 1) // TILE_SIZE
    nty = (height + TILE_SIZE - 1) // TILE_SIZE
    m2d = proj.mean2d[order]
    rad = proj.radius[order]
    vis = ~proj.culled[order]

    x0 = np.clip(np.floor((m2d[:, 0] - rad) / TILE_SIZE).astype(np.int64), 0, ntx)
    x1 = np.clip(np.floor((m2d[:, 0] + rad) / TILE_SIZE).astype(np.int64) + 1, 0, ntx)
    y0 = np.clip(np.floor((m2d[:, 1] - rad) / TILE_SIZE).astype(np.int64), 0, nty)
    y1 = np.clip(np.floor((m2d[:, 1] + rad) / TILE_SIZE).astype(np.int64) + 1, 0, nty)
    x0, x1 = np.where(vis, x0, 0), np.where(vis, x1, 0)
    y0, y1 = np.where(vis, y0, 0), np.where(vis, y1, 0)

    wx = x1 - x0
    wy = y1 - y0
    total = int((wx * wy).sum())
    entries_parts = []
    tile_parts = []
    # Stamp tile rectangles by offset so no per-splat Python loop is needed.
    for dy in range(int(wy.max()) if len(wy) else 0):
        row_ok = wy > dy
        for dx in range(int(wx.max()) if len(wx) else 0):
            sel = np.flatnonzero(row_ok & (wx > dx))
            if len(sel) == 0:
                continue
            entries_parts.append(sel.astype(np.int32))
            tile_parts.append((y0[sel] + dy) * ntx + (x0[sel] + dx))
    if entries_parts:
        entries = np.concatenate(entries_parts)
        tile_ids = np.concatenate(tile_parts)
    else:
        entries = np.empty(0, dtype=np.int32)
        tile_ids = np.empty(0, dtype=np.int64)
    assert len(entries) == total

    # Per tile, keep ascending sorted-position (= front-to-back) order.
    srt = np.lexsort((entries, tile_ids))
    tile_ids = tile_ids[srt]
    entries = entries[srt]
    offsets = np.zeros(ntx * nty + 1, dtype=np.int32)
    np.add.at(offsets, tile_ids + 1, 1)
    offsets = np.cumsum(offsets, dtype=np.int64).astype(np.int32)
    return entries, offsets


def rasterize_with_cache(
    gaussians: GlobalGaussians,
    cam: Camera,
    background,
    backend: str | None = None,
) -> tuple[RenderOutput, _Cache]:
    background = np.asarray(background, dtype=np.float64)
    wr = cam.rotation
    means_cam = gaussians.means @ wr.T + cam.translation
    proj = project(gaussians, cam)

    # Global front-to-back order: depth, ties by input index.
    order = np.lexsort((np.arange(len(gaussians)), proj.depth))
    entries, offsets = _bin_tiles(proj, order, cam.width, cam.height)

    impl = _kernels.get_impl(backend)
    color, depth, normal, alpha, final_t, n_proc = impl.composite_forward(
        np.ascontiguousarray(proj.mean2d[order]),
        np.ascontiguousarray(proj.conic[order]),
        np.ascontiguousarray(proj.color[order]),
        np.ascontiguousarray(proj.opacity[order]),
        np.ascontiguousarray(proj.depth[order]),
        np.ascontiguousarray(gaussians.normals[order]),
        entries,
        offsets,
        cam.height,
        cam.width,
        TILE_SIZE,
        background,
    )
    out = RenderOutput(color=color, depth=depth, normal=normal, alpha=alpha)

    quats_unit = quat.normalize(gaussians.quats)
    rot3 = quat.to_matrix(quats_unit)
    cov3 = covariance(rot3, gaussians.scales)
    cov_cam = np.einsum("ij,njk,lk->nil", wr, cov3, wr)
    z = means_cam[:, 2]
    zs = np.where(z > NEAR_PLANE, z, 1.0)
    jac = np.zeros((len(gaussians), 2, 3))
    jac[:, 0, 0] = cam.fx / zs
    jac[:, 0, 2] = -cam.fx * means_cam[:, 0] / (zs * zs)
    jac[:, 1, 1] = cam.fy / zs
    jac[:, 1, 2] = -cam.fy * means_cam[:, 1] / (zs * zs)
    dirs_raw = gaussians.means - cam.center()
    dirs = dirs_raw / np.maximum(np.linalg.norm(dirs_raw, axis=1, keepdims=True), 1e-12)

    cache = _Cache(
        gaussians=gaussians,
        cam=cam,
        background=background,
        backend=backend,
        visible=~proj.culled,
        means_cam=means_cam,
        jac=jac,
        cov_cam=cov_cam,
        rot3=rot3,
        quats_unit=quats_unit,
        dirs_raw=dirs_raw,
        dirs=dirs,
        proj=proj,
        order=order,
        tile_entries=entries,
        tile_offsets=offsets,
        final_t=final_t,
        n_proc=n_proc,
    )
    return out, cache


def rasterize(
    gaussians: GlobalGaussians, cam: Camera, background, backend: str | None = None
) -> RenderOutput:
    """Render color/depth/normal/alpha buffers from world-space Gaussians."""
    return rasterize_with_cache(gaussians, cam, background, backend)[0]


def backward_from_cache(
    cache: _Cache,
    grad_color: np.ndarray,
    grad_depth: np.ndarray | None = None,
    grad_normal: np.ndarray | None = None,
    grad_alpha: np.ndarray | None = None,
) -> GlobalGrads:
    cam, g = cache.cam, cache.gaussians
    h, w = cam.height, cam.width
    zeros2 = np.zeros((h, w))
    grad_depth = zeros2 if grad_depth is None else np.asarray(grad_depth, dtype=np.float64)
    grad_normal = (
        np.zeros((h, w, 3)) if grad_normal is None else np.asarray(grad_normal, dtype=np.float64)
    )
    grad_alpha = zeros2 if grad_alpha is None else np.asarray(grad_alpha, dtype=np.float64)
    grad_color = np.asarray(grad_color, dtype=np.float64)

    impl = _kernels.get_impl(cache.backend)
    order, proj = cache.order, cache.proj
    km = impl.composite_backward(
        np.ascontiguousarray(proj.mean2d[order]),
        np.ascontiguousarray(proj.conic[order]),
        np.ascontiguousarray(proj.color[order]),
        np.ascontiguousarray(proj.opacity[order]),
        np.ascontiguousarray(proj.depth[order]),
        np.ascontiguousarray(g.normals[order]),
        cache.tile_entries,
        cache.tile_offsets,
        h,
        w,
        TILE_SIZE,
        cache.background,
        cache.final_t,
        cache.n_proc,
        np.ascontiguousarray(grad_color),
        grad_depth,
        np.ascontiguousarray(grad_normal),
        grad_alpha,
    )
    g_mean2d, g_conic, g_color, g_opac, g_depth, g_normal = (np.empty_like(a) for a in km)
    for dst, src in zip((g_mean2d, g_conic, g_color, g_opac, g_depth, g_normal), km):
        dst[order] = src

    # conic -> 2D covariance (A = inverse covariance)
    n = len(g.means)
    ga = np.empty((n, 2, 2))
    ga[:, 0, 0] = g_conic[:, 0]
    ga[:, 0, 1] = ga[:, 1, 0] = 0.5 * g_conic[:, 1]
    ga[:, 1, 1] = g_conic[:, 2]
    inv = np.empty((n, 2, 2))
    inv[:, 0, 0] = proj.conic[:, 0]
    inv[:, 0, 1] = inv[:, 1, 0] = proj.conic[:, 1]
    inv[:, 1, 1] = proj.conic[:, 2]
    g_cov2 = -np.einsum("nij,njk,nkl->nil", inv, ga, inv)

    jac, cov_cam = cache.jac, cache.cov_cam
    g_cov_cam = np.einsum("nji,njk,nkl->nil", jac, g_cov2, jac)
    g2sym = g_cov2 + np.swapaxes(g_cov2, 1, 2)
    g_jac = np.einsum("nij,njk,nkl->nil", g2sym, jac, cov_cam)
    wr = cam.rotation
    g_cov3 = np.einsum("ji,njk,kl->nil", wr, g_cov_cam, wr)

    x, y, z = cache.means_cam[:, 0], cache.means_cam[:, 1], cache.means_cam[:, 2]
    zs = np.where(z > NEAR_PLANE, z, 1.0)
    fx, fy = cam.fx, cam.fy
    g_t = np.empty((n, 3))
    g_t[:, 0] = g_mean2d[:, 0] * fx / zs - g_jac[:, 0, 2] * fx / (zs * zs)
    g_t[:, 1] = g_mean2d[:, 1] * fy / zs - g_jac[:, 1, 2] * fy / (zs * zs)
    g_t[:, 2] = (
        -g_mean2d[:, 0] * fx * x / (zs * zs)
        - g_mean2d[:, 1] * fy * y / (zs * zs)
        - g_jac[:, 0, 0] * fx / (zs * zs)
        + g_jac[:, 0, 2] * 2.0 * fx * x / (zs ** 3)
        - g_jac[:, 1, 1] * fy / (zs * zs)
        + g_jac[:, 1, 2] * 2.0 * fy * y / (zs ** 3)
        + g_depth
    )
    g_means = g_t @ wr

    d_sh, d_dirs = shlib.eval_sh_backward(g.sh, cache.dirs, g_color)
    g_means = g_means + quat.normalize_backward(cache.dirs_raw, d_dirs)

    rs = cache.rot3 * g.scales[:, None, :]
    g_rs = np.einsum("nij,njk->nik", g_cov3 + np.swapaxes(g_cov3, 1, 2), rs)
    g_rot = g_rs * g.scales[:, None, :]
    g_scales = np.einsum("nij,nij->nj", g_rs, cache.rot3)
    g_quats = quat.to_matrix_backward(cache.quats_unit, g_rot)

    vis = cache.visible
    out = GlobalGrads(
        means=np.where(vis[:, None], g_means, 0.0),
        quats=np.where(vis[:, None], g_quats, 0.0),
        scales=np.where(vis[:, None], g_scales, 0.0),
        opacities=np.where(vis, g_opac, 0.0),
        sh=np.where(vis[:, None, None], d_sh, 0.0),
        normals=np.where(vis[:, None], g_normal, 0.0),
    )
    return out


def backward(
    gaussians: GlobalGaussians,
    cam: Camera,
    background,
    grad_color: np.ndarray,
    grad_depth: np.ndarray | None = None,
    grad_normal: np.ndarray | None = None,
    grad_alpha: np.ndarray | None = None,
    backend: str | None = None,
) -> GlobalGrads:
    """Gradients of a scalar loss w.r.t. all Gaussian parameters, given the
    loss gradients w.r.t. the rendered buffers."""
    _, cache = rasterize_with_cache(gaussians, cam, background, backend)
    return backward_from_cache(cache, grad_color, grad_depth, grad_normal, grad_alpha)


def pseudo_normal_from_depth(
    depth: np.ndarray,
    cam: Camera,
    alpha: np.ndarray | None = None,
    coverage_threshold: float = 0.5,
) -> np.ndarray:
    """World-space normals from a rendered depth map via local planarity.

    Each pixel and its right/down neighbors are back-projected to camera
    space; the normalized cross product of the two difference vectors gives
    the normal, oriented toward the camera.  Pixels lacking coverage (or
    neighbors) are zero.
    """
    h, w = depth.shape
    covered = np.ones((h, w), dtype=bool) if alpha is None else alpha > coverage_threshold

    xs = (np.arange(w) + 0.5 - cam.cx) / cam.fx
    ys = (np.arange(h) + 0.5 - cam.cy) / cam.fy
    pts = np.empty((h, w, 3))
    pts[..., 0] = xs[None, :] * depth
    pts[..., 1] = ys[:, None] * depth
    pts[..., 2] = depth

    d_right = pts[:-1, 1:] - pts[:-1, :-1]
    d_down = pts[1:, :-1] - pts[:-1, :-1]
    n_cam = np.cross(d_down, d_right)
    norm = np.linalg.norm(n_cam, axis=2, keepdims=True)
    valid = (
        covered[:-1, :-1]
        & covered[:-1, 1:]
        & covered[1:, :-1]
        & (norm[..., 0] > 1e-20)
    )
    n_cam = np.where(valid[..., None], n_cam / np.where(norm > 0, norm, 1.0), 0.0)

    out = np.zeros((h, w, 3))
    out[:-1, :-1] = n_cam @ cam.rotation
    return out
