# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled compositing kernels: scalar per-pixel loops, front-to-back.

Same contract as compositing_py; each pixel composites its tile's splats in
the given (depth-sorted) order, so output is deterministic and independent of
how the image is tiled.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

cdef double ALPHA_MIN = 1.0 / 255.0
cdef double ALPHA_MAX = 0.99
cdef double T_STOP = 1e-6


def composite_forward(
    double[:, ::1] means2d,
    double[:, ::1] conics,
    double[:, ::1] colors,
    double[::1] opacities,
    double[::1] power_min,
    double[::1] depths,
    double[:, ::1] normals,
    int[::1] tile_entries,
    int[::1] tile_offsets,
    int height,
    int width,
    int tile_size,
    double[::1] background,
):
    color_np = np.zeros((height, width, 3))
    depth_np = np.zeros((height, width))
    normal_np = np.zeros((height, width, 3))
    alpha_np = np.zeros((height, width))
    final_t_np = np.ones((height, width))
    n_proc_np = np.zeros((height, width), dtype=np.int32)

    cdef double[:, :, ::1] color = color_np
    cdef double[:, ::1] depth = depth_np
    cdef double[:, :, ::1] normal = normal_np
    cdef double[:, ::1] alpha = alpha_np
    cdef double[:, ::1] final_t = final_t_np
    cdef int[:, ::1] n_proc = n_proc_np

    cdef int n_tiles_x = (width + tile_size - 1) // tile_size
    cdef int n_tiles = tile_offsets.shape[0] - 1
    cdef int tile_id, ty, tx, y0, y1, x0, x1, py, px, k, s, start, end, c, nproc
    cdef double cx, cy, dx, dy, power, a, t, w

    with nogil:
        for tile_id in range(n_tiles):
            start = tile_offsets[tile_id]
            end = tile_offsets[tile_id + 1]
            ty = tile_id // n_tiles_x
            tx = tile_id - ty * n_tiles_x
            y0 = ty * tile_size
            y1 = min(y0 + tile_size, height)
            x0 = tx * tile_size
            x1 = min(x0 + tile_size, width)
            for py in range(y0, y1):
                cy = py + 0.5
                for px in range(x0, x1):
                    cx = px + 0.5
                    t = 1.0
                    nproc = 0
                    for k in range(start, end):
                        if t < T_STOP:
                            break
                        nproc = k - start + 1
                        s = tile_entries[k]
                        dx = cx - means2d[s, 0]
                        dy = cy - means2d[s, 1]
                        power = (-0.5 * (conics[s, 0] * dx * dx + conics[s, 2] * dy * dy)
                                 - conics[s, 1] * dx * dy)
                        if power < power_min[s]:
                            continue
                        a = opacities[s] * exp(power)
                        if a > ALPHA_MAX:
                            a = ALPHA_MAX
                        w = t * a
                        for c in range(3):
                            color[py, px, c] += w * colors[s, c]
                            normal[py, px, c] += w * normals[s, c]
                        depth[py, px] += w * depths[s]
                        alpha[py, px] += w
                        t = t * (1.0 - a)
                    for c in range(3):
                        color[py, px, c] += t * background[c]
                    final_t[py, px] = t
                    n_proc[py, px] = nproc

    return color_np, depth_np, normal_np, alpha_np, final_t_np, n_proc_np


def composite_backward(
    double[:, ::1] means2d,
    double[:, ::1] conics,
    double[:, ::1] colors,
    double[::1] opacities,
    double[::1] power_min,
    double[::1] depths,
    double[:, ::1] normals,
    int[::1] tile_entries,
    int[::1] tile_offsets,
    int height,
    int width,
    int tile_size,
    double[::1] background,
    double[:, ::1] final_t,
    int[:, ::1] n_proc,
    double[:, :, ::1] grad_color,
    double[:, ::1] grad_depth,
    double[:, :, ::1] grad_normal,
    double[:, ::1] grad_alpha,
):
    cdef int n = means2d.shape[0]
    g_means2d_np = np.zeros((n, 2))
    g_conics_np = np.zeros((n, 3))
    g_colors_np = np.zeros((n, 3))
    g_opacities_np = np.zeros(n)
    g_depths_np = np.zeros(n)
    g_normals_np = np.zeros((n, 3))

    cdef double[:, ::1] g_means2d = g_means2d_np
    cdef double[:, ::1] g_conics = g_conics_np
    cdef double[:, ::1] g_colors = g_colors_np
    cdef double[::1] g_opacities = g_opacities_np
    cdef double[::1] g_depths = g_depths_np
    cdef double[:, ::1] g_normals = g_normals_np

    cdef int n_tiles_x = (width + tile_size - 1) // tile_size
    cdef int n_tiles = tile_offsets.shape[0] - 1
    cdef int tile_id, ty, tx, y0, y1, x0, x1, py, px, k, s, start, end, c, nproc
    cdef double cx, cy, dx, dy, power, g, a_raw, a, t, w, da, ft, bg_dot, d_power
    cdef double acc_c[3]
    cdef double acc_n[3]
    cdef double acc_d, acc_b

    with nogil:
        for tile_id in range(n_tiles):
            start = tile_offsets[tile_id]
            end = tile_offsets[tile_id + 1]
            if end == start:
                continue
            ty = tile_id // n_tiles_x
            tx = tile_id - ty * n_tiles_x
            y0 = ty * tile_size
            y1 = min(y0 + tile_size, height)
            x0 = tx * tile_size
            x1 = min(x0 + tile_size, width)
            for py in range(y0, y1):
                cy = py + 0.5
                for px in range(x0, x1):
                    cx = px + 0.5
                    nproc = n_proc[py, px]
                    if nproc == 0:
                        continue
                    ft = final_t[py, px]
                    t = ft
                    bg_dot = 0.0
                    for c in range(3):
                        bg_dot += background[c] * grad_color[py, px, c]
                        acc_c[c] = 0.0
                        acc_n[c] = 0.0
                    acc_d = 0.0
                    acc_b = 0.0
                    for k in range(start + nproc - 1, start - 1, -1):
                        s = tile_entries[k]
                        dx = cx - means2d[s, 0]
                        dy = cy - means2d[s, 1]
                        power = (-0.5 * (conics[s, 0] * dx * dx + conics[s, 2] * dy * dy)
                                 - conics[s, 1] * dx * dy)
                        if power < power_min[s]:
                            continue
                        g = exp(power)
                        a_raw = opacities[s] * g
                        a = a_raw
                        if a > ALPHA_MAX:
                            a = ALPHA_MAX
                        t = t / (1.0 - a)
                        w = t * a

                        da = 0.0
                        for c in range(3):
                            g_colors[s, c] += w * grad_color[py, px, c]
                            g_normals[s, c] += w * grad_normal[py, px, c]
                            da += (colors[s, c] - acc_c[c]) * grad_color[py, px, c]
                            da += (normals[s, c] - acc_n[c]) * grad_normal[py, px, c]
                        g_depths[s] += w * grad_depth[py, px]
                        da += (depths[s] - acc_d) * grad_depth[py, px]
                        da += (1.0 - acc_b) * grad_alpha[py, px]
                        da = t * da - ft / (1.0 - a) * bg_dot

                        for c in range(3):
                            acc_c[c] = a * colors[s, c] + (1.0 - a) * acc_c[c]
                            acc_n[c] = a * normals[s, c] + (1.0 - a) * acc_n[c]
                        acc_d = a * depths[s] + (1.0 - a) * acc_d
                        acc_b = a + (1.0 - a) * acc_b

                        if a_raw < ALPHA_MAX:
                            g_opacities[s] += g * da
                            d_power = opacities[s] * g * da
                            g_conics[s, 0] += -0.5 * dx * dx * d_power
                            g_conics[s, 1] += -dx * dy * d_power
                            g_conics[s, 2] += -0.5 * dy * dy * d_power
                            g_means2d[s, 0] += (conics[s, 0] * dx + conics[s, 1] * dy) * d_power
                            g_means2d[s, 1] += (conics[s, 1] * dx + conics[s, 2] * dy) * d_power

    return g_means2d_np, g_conics_np, g_colors_np, g_opacities_np, g_depths_np, g_normals_np
