"""Batched quaternion/rotation-matrix conversions and their derivatives.

Quaternions are (w, x, y, z).  All functions take (N,4) / (N,3,3) arrays.
"""

from __future__ import annotations

import numpy as np


def normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def normalize_backward(q_raw: np.ndarray, grad_unit: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. raw vectors given gradient w.r.t. their unit versions."""
    norm = np.linalg.norm(q_raw, axis=-1, keepdims=True)
    u = q_raw / norm
    return (grad_unit - np.sum(grad_unit * u, axis=-1, keepdims=True) * u) / norm


def to_matrix(q: np.ndarray) -> np.ndarray:
    """Unit quaternions -> rotation matrices, shape (N,3,3)."""
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def to_matrix_backward(q: np.ndarray, grad_matrix: np.ndarray) -> np.ndarray:
    """d(loss)/d(unit q) given d(loss)/dR, both batched."""
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    g = grad_matrix
    gw = 2 * (
        -z * g[..., 0, 1] + y * g[..., 0, 2]
        + z * g[..., 1, 0] - x * g[..., 1, 2]
        - y * g[..., 2, 0] + x * g[..., 2, 1]
    )
    gx = 2 * (
        y * g[..., 0, 1] + z * g[..., 0, 2]
        + y * g[..., 1, 0] - 2 * x * g[..., 1, 1] - w * g[..., 1, 2]
        + z * g[..., 2, 0] + w * g[..., 2, 1] - 2 * x * g[..., 2, 2]
    )
    gy = 2 * (
        -2 * y * g[..., 0, 0] + x * g[..., 0, 1] + w * g[..., 0, 2]
        + x * g[..., 1, 0] + z * g[..., 1, 2]
        - w * g[..., 2, 0] + z * g[..., 2, 1] - 2 * y * g[..., 2, 2]
    )
    gz = 2 * (
        -2 * z * g[..., 0, 0] - w * g[..., 0, 1] + x * g[..., 0, 2]
        + w * g[..., 1, 0] - 2 * z * g[..., 1, 1] + y * g[..., 1, 2]
        + x * g[..., 2, 0] + y * g[..., 2, 1]
    )
    return np.stack([gw, gx, gy, gz], axis=-1)


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b; rotation composition R(a) @ R(b)."""
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def multiply_backward_right(a: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """d(loss)/db for out = a*b; the product is linear in b."""
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    gw, gx, gy, gz = grad_out[..., 0], grad_out[..., 1], grad_out[..., 2], grad_out[..., 3]
    # Transpose of the left-multiplication matrix.
    return np.stack(
        [
            aw * gw + ax * gx + ay * gy + az * gz,
            -ax * gw + aw * gx + az * gy - ay * gz,
            -ay * gw - az * gx + aw * gy + ax * gz,
            -az * gw + ay * gx - ax * gy + aw * gz,
        ],
        axis=-1,
    )


def from_matrix(m: np.ndarray) -> np.ndarray:
    """Rotation matrices -> unit quaternions (w >= 0), batched.

    Shepperd-style: evaluate all four candidate decompositions and keep the
    one with the largest pivot, which is always numerically safe.
    """
    m = np.asarray(m, dtype=np.float64)
    single = m.ndim == 2
    if single:
        m = m[None]
    m00, m01, m02 = m[:, 0, 0], m[:, 0, 1], m[:, 0, 2]
    m10, m11, m12 = m[:, 1, 0], m[:, 1, 1], m[:, 1, 2]
    m20, m21, m22 = m[:, 2, 0], m[:, 2, 1], m[:, 2, 2]

    # Squared doubled quaternion components (pivots), each >= 0 up to rounding.
    pw = np.maximum(1.0 + m00 + m11 + m22, 0.0)
    px = np.maximum(1.0 + m00 - m11 - m22, 0.0)
    py = np.maximum(1.0 - m00 + m11 - m22, 0.0)
    pz = np.maximum(1.0 - m00 - m11 + m22, 0.0)
    cand = np.empty((4, len(m), 4), dtype=np.float64)
    sw = 2.0 * np.sqrt(np.maximum(pw, 1e-30))
    cand[0] = np.stack([0.25 * sw, (m21 - m12) / sw, (m02 - m20) / sw, (m10 - m01) / sw], axis=1)
    sx = 2.0 * np.sqrt(np.maximum(px, 1e-30))
    cand[1] = np.stack([(m21 - m12) / sx, 0.25 * sx, (m01 + m10) / sx, (m02 + m20) / sx], axis=1)
    sy = 2.0 * np.sqrt(np.maximum(py, 1e-30))
    cand[2] = np.stack([(m02 - m20) / sy, (m01 + m10) / sy, 0.25 * sy, (m12 + m21) / sy], axis=1)
    sz = 2.0 * np.sqrt(np.maximum(pz, 1e-30))
    cand[3] = np.stack([(m10 - m01) / sz, (m02 + m20) / sz, (m12 + m21) / sz, 0.25 * sz], axis=1)

    pick = np.argmax(np.stack([pw, px, py, pz]), axis=0)
    q = cand[pick, np.arange(len(m))]
    q = np.where(q[:, :1] < 0, -q, q)
    q = normalize(q)
    return q[0] if single else q
