"""Pure-numpy compositing kernels (fallback backend).

Vectorized over the pixels of one tile, sequential over splats, which keeps
the per-pixel operation order identical to the scalar compiled kernel: every
pixel sees its overlapping splats strictly front-to-back.
"""

from __future__ import annotations

import numpy as np

ALPHA_MIN = 1.0 / 255.0
ALPHA_MAX = 0.99
T_STOP = 1e-6


def _tile_pixels(tile_id, n_tiles_x, tile_size, width, height):
    ty, tx = divmod(tile_id, n_tiles_x)
    ys = np.arange(ty * tile_size, min((ty + 1) * tile_size, height))
    xs = np.arange(tx * tile_size, min((tx + 1) * tile_size, width))
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return ys, xs, (xx.ravel() + 0.5), (yy.ravel() + 0.5)


def composite_forward(
    means2d,
    conics,
    colors,
    opacities,
    power_min,
    depths,
    normals,
    tile_entries,
    tile_offsets,
    height,
    width,
    tile_size,
    background,
):
    color = np.zeros((height, width, 3))
    depth = np.zeros((height, width))
    normal = np.zeros((height, width, 3))
    alpha = np.zeros((height, width))
    final_t = np.ones((height, width))
    n_proc = np.zeros((height, width), dtype=np.int32)

    n_tiles_x = (width + tile_size - 1) // tile_size
    n_tiles = len(tile_offsets) - 1
    for tile_id in range(n_tiles):
        start, end = tile_offsets[tile_id], tile_offsets[tile_id + 1]
        ys, xs, px, py = _tile_pixels(tile_id, n_tiles_x, tile_size, width, height)
        npix = px.size
        t = np.ones(npix)
        acc_c = np.zeros((npix, 3))
        acc_d = np.zeros(npix)
        acc_n = np.zeros((npix, 3))
        acc_b = np.zeros(npix)
        nproc = np.zeros(npix, dtype=np.int32)
        for k in range(start, end):
            active = t >= T_STOP
            if not active.any():
                break
            s = tile_entries[k]
            nproc[active] = k - start + 1
            dx = px - means2d[s, 0]
            dy = py - means2d[s, 1]
            power = -0.5 * (conics[s, 0] * dx * dx + conics[s, 2] * dy * dy) - conics[s, 1] * dx * dy
            use = active & (power >= power_min[s])
            a = np.where(use, np.minimum(opacities[s] * np.exp(power), ALPHA_MAX), 0.0)
            w = t * a
            acc_c += w[:, None] * colors[s]
            acc_d += w * depths[s]
            acc_n += w[:, None] * normals[s]
            acc_b += w
            t = t * (1.0 - a)

        shape = (len(ys), len(xs))
        sl = np.s_[ys[0] : ys[0] + shape[0], xs[0] : xs[0] + shape[1]]
        color[sl] = (acc_c + t[:, None] * background).reshape(shape + (3,))
        depth[sl] = acc_d.reshape(shape)
        normal[sl] = acc_n.reshape(shape + (3,))
        alpha[sl] = acc_b.reshape(shape)
        final_t[sl] = t.reshape(shape)
        n_proc[sl] = nproc.reshape(shape)

    return color, depth, normal, alpha, final_t, n_proc


def composite_backward(
    means2d,
    conics,
    colors,
    opacities,
    power_min,
    depths,
    normals,
    tile_entries,
    tile_offsets,
    height,
    width,
    tile_size,
    background,
    final_t,
    n_proc,
    grad_color,
    grad_depth,
    grad_normal,
    grad_alpha,
):
    n = len(means2d)
    g_means2d = np.zeros((n, 2))
    g_conics = np.zeros((n, 3))
    g_colors = np.zeros((n, 3))
    g_opacities = np.zeros(n)
    g_depths = np.zeros(n)
    g_normals = np.zeros((n, 3))

    n_tiles_x = (width + tile_size - 1) // tile_size
    n_tiles = len(tile_offsets) - 1
    for tile_id in range(n_tiles):
        start, end = tile_offsets[tile_id], tile_offsets[tile_id + 1]
        if end == start:
            continue
        ys, xs, px, py = _tile_pixels(tile_id, n_tiles_x, tile_size, width, height)
        shape = (len(ys), len(xs))
        sl = np.s_[ys[0] : ys[0] + shape[0], xs[0] : xs[0] + shape[1]]
        npix = px.size

        gc = grad_color[sl].reshape(npix, 3)
        gd = grad_depth[sl].reshape(npix)
        gn = grad_normal[sl].reshape(npix, 3)
        gb = grad_alpha[sl].reshape(npix)
        ft = final_t[sl].reshape(npix)
        nproc = n_proc[sl].reshape(npix)
        bg_dot = gc @ background

        t = ft.copy()
        acc_c = np.zeros((npix, 3))
        acc_d = np.zeros(npix)
        acc_n = np.zeros((npix, 3))
        acc_b = np.zeros(npix)
        kmax = int(nproc.max())
        for k in range(kmax - 1, -1, -1):
            s = tile_entries[start + k]
            within = nproc > k
            dx = px - means2d[s, 0]
            dy = py - means2d[s, 1]
            power = -0.5 * (conics[s, 0] * dx * dx + conics[s, 2] * dy * dy) - conics[s, 1] * dx * dy
            use = within & (power >= power_min[s])
            if not use.any():
                continue
            a_raw = opacities[s] * np.exp(power)
            a = np.where(use, np.minimum(a_raw, ALPHA_MAX), 0.0)
            t = np.where(use, t / (1.0 - a), t)
            w = t * a

            g_colors[s] += w @ gc
            g_depths[s] += w @ gd
            g_normals[s] += w @ gn

            da = (
                np.einsum("pc,pc->p", colors[s] - acc_c, gc)
                + (depths[s] - acc_d) * gd
                + np.einsum("pc,pc->p", normals[s] - acc_n, gn)
                + (1.0 - acc_b) * gb
            )
            da = t * da - np.where(use, ft / (1.0 - a), 0.0) * bg_dot
            da = np.where(use, da, 0.0)

            au = a[:, None]
            acc_c = np.where(use[:, None], au * colors[s] + (1.0 - au) * acc_c, acc_c)
            acc_d = np.where(use, a * depths[s] + (1.0 - a) * acc_d, acc_d)
            acc_n = np.where(use[:, None], au * normals[s] + (1.0 - au) * acc_n, acc_n)
            acc_b = np.where(use, a + (1.0 - a) * acc_b, acc_b)

            grad_flow = use & (a_raw < ALPHA_MAX)
            g = np.exp(power)
            gop = np.where(grad_flow, g * da, 0.0)
            g_opacities[s] += gop.sum()
            d_power = np.where(grad_flow, opacities[s] * g * da, 0.0)
            g_conics[s, 0] += (-0.5 * dx * dx * d_power).sum()
            g_conics[s, 1] += (-dx * dy * d_power).sum()
            g_conics[s, 2] += (-0.5 * dy * dy * d_power).sum()
            g_means2d[s, 0] += ((conics[s, 0] * dx + conics[s, 1] * dy) * d_power).sum()
            g_means2d[s, 1] += ((conics[s, 1] * dx + conics[s, 2] * dy) * d_power).sum()

    return g_means2d, g_conics, g_colors, g_opacities, g_depths, g_normals
