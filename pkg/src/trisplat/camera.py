"""Pinhole camera with a +z-forward, y-down camera frame."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

NEAR_PLANE = 0.01


@dataclass
class Camera:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    world_to_camera: np.ndarray  # (4,4) rigid

    def __post_init__(self):
        self.world_to_camera = np.asarray(self.world_to_camera, dtype=np.float64)
        if self.width < 1 or self.height < 1:
            raise ConfigError("image dimensions must be >= 1")
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigError("focal lengths must be positive")
        if self.world_to_camera.shape != (4, 4):
            raise ConfigError("world_to_camera must be 4x4")
        r = self.world_to_camera[:3, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6):
            raise ConfigError("world_to_camera rotation block is not orthonormal")

    @property
    def rotation(self) -> np.ndarray:
        return self.world_to_camera[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.world_to_camera[:3, 3]

    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation

    def to_world_direction(self, directions: np.ndarray) -> np.ndarray:
        return directions @ self.rotation

    def project_points(self, points: np.ndarray) -> np.ndarray:
        """World points -> (x_pix, y_pix, depth)."""
        cam = self.to_camera(np.atleast_2d(points))
        z = cam[:, 2]
        return np.stack(
            [self.fx * cam[:, 0] / z + self.cx, self.fy * cam[:, 1] / z + self.cy, z], axis=1
        )

    def backproject(self, pix_x, pix_y, depth) -> np.ndarray:
        """Pixel coordinates + camera-space depth -> world points."""
        x = (np.asarray(pix_x) - self.cx) / self.fx * depth
        y = (np.asarray(pix_y) - self.cy) / self.fy * depth
        cam = np.stack(np.broadcast_arrays(x, y, depth), axis=-1)
        return (cam - self.translation) @ self.rotation


def look_at(
    eye,
    target,
    up=(0.0, 0.0, 1.0),
    width: int = 128,
    height: int = 128,
    fov_x: float = 0.8,
) -> Camera:
    """Camera at `eye` looking at `target`; fov_x is the horizontal FOV in radians."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward = forward / np.linalg.norm(forward)
    up = np.asarray(up, dtype=np.float64)
    right = np.cross(forward, up)
    norm = np.linalg.norm(right)
    if norm < 1e-9:  # forward parallel to up; pick any perpendicular
        right = np.cross(forward, np.array([1.0, 0.0, 0.0]))
        norm = np.linalg.norm(right)
    right /= norm
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward], axis=0)
    w2c = np.eye(4)
    w2c[:3, :3] = rot
    w2c[:3, 3] = -rot @ eye
    fx = 0.5 * width / np.tan(0.5 * fov_x)
    return Camera(
        width=width,
        height=height,
        fx=fx,
        fy=fx,
        cx=width / 2.0,
        cy=height / 2.0,
        world_to_camera=w2c,
    )


def transform_camera(cam: Camera, rotation: np.ndarray, translation: np.ndarray) -> Camera:
    """Camera that sees a rigidly moved world exactly as `cam` saw the original."""
    move = np.eye(4)
    move[:3, :3] = np.asarray(rotation, dtype=np.float64)
    move[:3, 3] = np.asarray(translation, dtype=np.float64)
    return Camera(
        width=cam.width,
        height=cam.height,
        fx=cam.fx,
        fy=cam.fy,
        cx=cam.cx,
        cy=cam.cy,
        world_to_camera=cam.world_to_camera @ np.linalg.inv(move),
    )
