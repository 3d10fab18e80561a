"""Gaussian primitive parameter sets and their activations.

Parameters are stored unconstrained (log-scale, opacity logit, raw
quaternion, raw normal) so optimizers can run without projections; the
activated view applies exp / sigmoid / normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quaternions as quat


def sh_coeff_count(degree: int) -> int:
    if not 0 <= degree <= 3:
        raise ValueError(f"SH degree must be in 0..3, got {degree}")
    return (degree + 1) ** 2


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def logit(p):
    return np.log(p) - np.log1p(-p)


@dataclass
class GlobalGaussians:
    """World-space Gaussians as consumed by the renderer (activated values)."""

    means: np.ndarray       # (N,3)
    quats: np.ndarray       # (N,4) unit
    scales: np.ndarray      # (N,3) positive
    opacities: np.ndarray   # (N,) in (0,1)
    sh: np.ndarray          # (N,K,3)
    normals: np.ndarray     # (N,3) unit

    def __len__(self) -> int:
        return len(self.means)

    @property
    def sh_degree(self) -> int:
        return int(round(np.sqrt(self.sh.shape[1]))) - 1

    def rotations(self) -> np.ndarray:
        return quat.to_matrix(self.quats)

    def covariances(self) -> np.ndarray:
        return covariance(self.rotations(), self.scales)


@dataclass
class GlobalGrads:
    """Gradients w.r.t. the activated world-space parameters."""

    means: np.ndarray
    quats: np.ndarray      # w.r.t. the unit quaternion
    scales: np.ndarray
    opacities: np.ndarray
    sh: np.ndarray
    normals: np.ndarray    # w.r.t. the unit normal

    @classmethod
    def zeros(cls, n: int, n_sh: int) -> "GlobalGrads":
        return cls(
            means=np.zeros((n, 3)),
            quats=np.zeros((n, 4)),
            scales=np.zeros((n, 3)),
            opacities=np.zeros(n),
            sh=np.zeros((n, n_sh, 3)),
            normals=np.zeros((n, 3)),
        )


def covariance(rotations: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """Covariance R S S^T R^T from rotation matrices and scale vectors."""
    rs = rotations * scales[..., None, :]
    return rs @ np.swapaxes(rs, -1, -2)


@dataclass
class FreeGaussians:
    """Unbound Gaussians with a learnable normal attribute (extraction stage)."""

    positions: np.ndarray       # (N,3)
    quats: np.ndarray           # (N,4) raw
    log_scales: np.ndarray      # (N,3)
    opacity_logits: np.ndarray  # (N,)
    sh: np.ndarray              # (N,K,3)
    normals: np.ndarray         # (N,3) raw

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def sh_degree(self) -> int:
        return int(round(np.sqrt(self.sh.shape[1]))) - 1

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {
            "positions": self.positions,
            "quats": self.quats,
            "log_scales": self.log_scales,
            "opacity_logits": self.opacity_logits,
            "sh": self.sh,
            "normals": self.normals,
        }

    def copy(self) -> "FreeGaussians":
        return FreeGaussians(**{k: v.copy() for k, v in self.param_arrays().items()})

    def activated(self) -> GlobalGaussians:
        return GlobalGaussians(
            means=self.positions.copy(),
            quats=quat.normalize(self.quats),
            scales=np.exp(self.log_scales),
            opacities=sigmoid(self.opacity_logits),
            sh=self.sh.copy(),
            normals=self.normals / np.linalg.norm(self.normals, axis=1, keepdims=True),
        )

    def activation_backward(self, g: GlobalGrads) -> dict[str, np.ndarray]:
        """Chain activated-parameter gradients back to the raw arrays."""
        scales = np.exp(self.log_scales)
        opac = sigmoid(self.opacity_logits)
        return {
            "positions": g.means.copy(),
            "quats": quat.normalize_backward(self.quats, g.quats),
            "log_scales": g.scales * scales,
            "opacity_logits": g.opacities * opac * (1.0 - opac),
            "sh": g.sh.copy(),
            "normals": quat.normalize_backward(self.normals, g.normals),
        }


def init_free(n: int, sh_degree: int = 2, rng: np.random.Generator | None = None) -> FreeGaussians:
    """Blank free-Gaussian set: mid-gray, opacity 0.1, unit scales, +z normals."""
    k = sh_coeff_count(sh_degree)
    quats = np.zeros((n, 4))
    quats[:, 0] = 1.0
    normals = np.zeros((n, 3))
    normals[:, 2] = 1.0
    positions = np.zeros((n, 3)) if rng is None else rng.standard_normal((n, 3))
    return FreeGaussians(
        positions=positions,
        quats=quats,
        log_scales=np.zeros((n, 3)),
        opacity_logits=np.full(n, logit(0.1)),
        sh=np.zeros((n, k, 3)),
        normals=normals,
    )
