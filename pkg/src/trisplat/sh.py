"""Real spherical harmonics color evaluation (degrees 0..3) and its gradients.

Color convention: RGB = sum_k coeff_k * Y_k(dir) + 0.5, clamped below at 0.
"""

from __future__ import annotations

import numpy as np

C0 = 0.28209479177387814
C1 = 0.4886025119029199
C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
      -1.0925484305920792, 0.5462742152960396)
C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
      0.3731763325901154, -0.4570457994644658, 1.445305721320277,
      -0.5900435899266435)


def basis(dirs: np.ndarray, degree: int) -> np.ndarray:
    """Basis values Y_k for unit directions, shape (N, (degree+1)^2)."""
    n = len(dirs)
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    out = np.empty((n, (degree + 1) ** 2), dtype=np.float64)
    out[:, 0] = C0
    if degree >= 1:
        out[:, 1] = -C1 * y
        out[:, 2] = C1 * z
        out[:, 3] = -C1 * x
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        out[:, 4] = C2[0] * x * y
        out[:, 5] = C2[1] * y * z
        out[:, 6] = C2[2] * (2.0 * zz - xx - yy)
        out[:, 7] = C2[3] * x * z
        out[:, 8] = C2[4] * (xx - yy)
    if degree >= 3:
        xx, yy, zz = x * x, y * y, z * z
        out[:, 9] = C3[0] * y * (3.0 * xx - yy)
        out[:, 10] = C3[1] * x * y * z
        out[:, 11] = C3[2] * y * (4.0 * zz - xx - yy)
        out[:, 12] = C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
        out[:, 13] = C3[4] * x * (4.0 * zz - xx - yy)
        out[:, 14] = C3[5] * z * (xx - yy)
        out[:, 15] = C3[6] * x * (xx - 3.0 * yy)
    return out


def basis_gradient(dirs: np.ndarray, degree: int) -> np.ndarray:
    """d(Y_k)/d(dir) for unit directions, shape (N, (degree+1)^2, 3)."""
    n = len(dirs)
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    zeros = np.zeros(n)
    g = np.zeros((n, (degree + 1) ** 2, 3), dtype=np.float64)
    if degree >= 1:
        g[:, 1] = np.stack([zeros, np.full(n, -C1), zeros], axis=1)
        g[:, 2] = np.stack([zeros, zeros, np.full(n, C1)], axis=1)
        g[:, 3] = np.stack([np.full(n, -C1), zeros, zeros], axis=1)
    if degree >= 2:
        g[:, 4] = C2[0] * np.stack([y, x, zeros], axis=1)
        g[:, 5] = C2[1] * np.stack([zeros, z, y], axis=1)
        g[:, 6] = C2[2] * np.stack([-2 * x, -2 * y, 4 * z], axis=1)
        g[:, 7] = C2[3] * np.stack([z, zeros, x], axis=1)
        g[:, 8] = C2[4] * np.stack([2 * x, -2 * y, zeros], axis=1)
    if degree >= 3:
        xx, yy, zz = x * x, y * y, z * z
        g[:, 9] = C3[0] * np.stack([6 * x * y, 3 * xx - 3 * yy, zeros], axis=1)
        g[:, 10] = C3[1] * np.stack([y * z, x * z, x * y], axis=1)
        g[:, 11] = C3[2] * np.stack([-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z], axis=1)
        g[:, 12] = C3[3] * np.stack([-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy], axis=1)
        g[:, 13] = C3[4] * np.stack([4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z], axis=1)
        g[:, 14] = C3[5] * np.stack([2 * x * z, -2 * y * z, xx - yy], axis=1)
        g[:, 15] = C3[6] * np.stack([3 * xx - 3 * yy, -6 * x * y, zeros], axis=1)
    return g


def eval_sh(coeffs: np.ndarray, view_dirs: np.ndarray, degree: int | None = None) -> np.ndarray:
    """RGB colors from SH coefficient sets (N,K,3) and unit view directions (N,3)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    view_dirs = np.asarray(view_dirs, dtype=np.float64)
    if degree is None:
        degree = int(round(np.sqrt(coeffs.shape[1]))) - 1
    k = (degree + 1) ** 2
    b = basis(view_dirs, degree)
    rgb = np.einsum("nk,nkc->nc", b, coeffs[:, :k]) + 0.5
    return np.maximum(rgb, 0.0)


def eval_sh_backward(
    coeffs: np.ndarray, view_dirs: np.ndarray, grad_rgb: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients (d_coeffs, d_dirs) of eval_sh; zero where the clamp is active."""
    degree = int(round(np.sqrt(coeffs.shape[1]))) - 1
    b = basis(view_dirs, degree)
    pre = np.einsum("nk,nkc->nc", b, coeffs) + 0.5
    g = np.where(pre > 0.0, grad_rgb, 0.0)
    d_coeffs = b[:, :, None] * g[:, None, :]
    gb = basis_gradient(view_dirs, degree)
    d_dirs = np.einsum("nkc,nkd->nd", coeffs * g[:, None, :], gb)
    return d_coeffs, d_dirs
