"""Image losses for fitting, each with an analytic gradient, plus PSNR.

SSIM follows the classic formulation: 11x11 Gaussian window (sigma 1.5),
C1=(0.01)^2, C2=(0.03)^2 on [0,1] images, population statistics, scored over
the valid (border-cropped) region.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
LOG_EPS = 1e-6


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def l1_loss(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute difference over all entries."""
    _check_same_shape(a, b)
    return float(np.abs(a - b).mean())


def l1_loss_grad(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_same_shape(a, b)
    return np.sign(a - b) / a.size


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def _filter_valid(img: np.ndarray, w: np.ndarray) -> np.ndarray:
    r = (len(w) - 1) // 2
    out = correlate1d(img, w, axis=0, mode="constant")
    out = correlate1d(out, w, axis=1, mode="constant")
    return out[r:-r, r:-r]


def _filter_valid_adjoint(grad: np.ndarray, w: np.ndarray, shape) -> np.ndarray:
    r = (len(w) - 1) // 2
    full = np.zeros(shape)
    full[r:-r, r:-r] = grad
    # Symmetric window: the adjoint correlation uses the same weights.
    full = correlate1d(full, w, axis=0, mode="constant")
    return correlate1d(full, w, axis=1, mode="constant")


def _ssim_channel(a, b, w):
    m1 = _filter_valid(a, w)
    m2 = _filter_valid(b, w)
    e_aa = _filter_valid(a * a, w)
    e_bb = _filter_valid(b * b, w)
    e_ab = _filter_valid(a * b, w)
    va = e_aa - m1 * m1
    vb = e_bb - m2 * m2
    vab = e_ab - m1 * m2
    top1 = 2 * m1 * m2 + SSIM_C1
    top2 = 2 * vab + SSIM_C2
    bot1 = m1 * m1 + m2 * m2 + SSIM_C1
    bot2 = va + vb + SSIM_C2
    s = (top1 * top2) / (bot1 * bot2)
    return s, (m1, m2, top1, top2, bot1, bot2)


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity of two [0,1] images (H,W) or (H,W,C)."""
    _check_same_shape(a, b)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    w = _gaussian_window()
    vals = [np.mean(_ssim_channel(a[..., c], b[..., c], w)[0]) for c in range(a.shape[2])]
    return float(np.mean(vals))


def ssim_loss(a: np.ndarray, b: np.ndarray) -> float:
    """1 - SSIM; zero iff the images are structurally identical."""
    return 1.0 - ssim(a, b)


def ssim_loss_with_grad(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """SSIM loss and its gradient w.r.t. the first image."""
    _check_same_shape(a, b)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    squeeze = a.ndim == 2
    if squeeze:
        a, b = a[..., None], b[..., None]
    w = _gaussian_window()
    grad = np.zeros_like(a)
    total = 0.0
    nch = a.shape[2]
    for c in range(nch):
        ac, bc = a[..., c], b[..., c]
        s, (m1, m2, top1, top2, bot1, bot2) = _ssim_channel(ac, bc, w)
        total += float(np.mean(s))
        gs = -1.0 / (s.size * nch)  # d(loss)/dS per map entry
        denom = bot1 * bot2
        ds_dm1 = 2 * m2 * (top2 - top1) / denom - 2 * m1 * s * (1.0 / bot1 - 1.0 / bot2)
        ds_de_aa = -s / bot2
        ds_de_ab = 2 * top1 / denom
        grad[..., c] = (
            _filter_valid_adjoint(gs * ds_dm1, w, ac.shape)
            + 2 * ac * _filter_valid_adjoint(gs * ds_de_aa, w, ac.shape)
            + bc * _filter_valid_adjoint(gs * ds_de_ab, w, ac.shape)
        )
    loss = 1.0 - total / nch
    return loss, (grad[..., 0] if squeeze else grad)


def mask_entropy_loss(alpha: np.ndarray, mask: np.ndarray) -> float:
    """Binary cross-entropy of accumulated alpha against an object mask."""
    _check_same_shape(alpha, mask)
    a = np.clip(alpha, LOG_EPS, 1.0 - LOG_EPS)
    return float(np.mean(-mask * np.log(a) - (1.0 - mask) * np.log(1.0 - a)))


def mask_entropy_loss_grad(alpha: np.ndarray, mask: np.ndarray) -> np.ndarray:
    _check_same_shape(alpha, mask)
    a = np.clip(alpha, LOG_EPS, 1.0 - LOG_EPS)
    inside = (alpha > LOG_EPS) & (alpha < 1.0 - LOG_EPS)
    g = (-mask / a + (1.0 - mask) / (1.0 - a)) / alpha.size
    return np.where(inside, g, 0.0)


def normal_consistency_loss(
    rendered: np.ndarray,
    pseudo: np.ndarray,
    alpha: np.ndarray | None = None,
    coverage_threshold: float = 0.5,
) -> float:
    """Mean per-pixel L2 distance between normal maps over covered pixels."""
    _check_same_shape(rendered, pseudo)
    diff = np.linalg.norm(rendered - pseudo, axis=-1)
    if alpha is None:
        return float(diff.mean()) if diff.size else 0.0
    covered = alpha > coverage_threshold
    if not covered.any():
        return 0.0
    return float(diff[covered].mean())


def normal_consistency_loss_grad(
    rendered: np.ndarray,
    pseudo: np.ndarray,
    alpha: np.ndarray | None = None,
    coverage_threshold: float = 0.5,
) -> np.ndarray:
    _check_same_shape(rendered, pseudo)
    diff = rendered - pseudo
    norm = np.linalg.norm(diff, axis=-1)
    covered = np.ones(norm.shape, dtype=bool) if alpha is None else alpha > coverage_threshold
    count = int(covered.sum())
    if count == 0:
        return np.zeros_like(rendered)
    safe = np.where(norm > 0, norm, 1.0)
    g = diff / safe[..., None] / count
    return np.where((covered & (norm > 0))[..., None], g, 0.0)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for [0,1] images; +inf when identical."""
    _check_same_shape(a, b)
    mse = float(np.mean((np.asarray(a, dtype=np.float64) - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))
