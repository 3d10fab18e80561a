"""Two-stage optimization of Gaussian attributes against training views.

Stage 1 fits free Gaussians (with normals supervised by pseudo-normals from
rendered depth) for mesh extraction; stage 2 fits the local attributes of
mesh-bound Gaussians.  The optimizer is Adam with per-group learning rates
and an exponentially decaying mean/position rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import losses, render
from .binding import (
    BindingConfig,
    LocalGaussians,
    to_global_backward,
    to_global_with_cache,
)
from .camera import Camera
from .errors import DivergenceError
from .gaussians import FreeGaussians
from .geometry import TriMesh, compute_frames


@dataclass
class LossWeights:
    """Term weights: total = l1*L1 + ssim*L_ssim + normal*L_n + mask*L_mask."""

    l1: float = 1.0
    ssim: float = 0.2
    normal: float = 0.0
    mask: float = 0.1

    @classmethod
    def stage_defaults(cls, stage: int) -> "LossWeights":
        if stage == 1:
            return cls(l1=1.0, ssim=0.2, normal=0.01, mask=0.1)
        if stage == 2:
            return cls(l1=1.0, ssim=0.2, normal=0.0, mask=0.1)
        raise ValueError(f"stage must be 1 or 2, got {stage}")


@dataclass
class TrainView:
    image: np.ndarray   # (H,W,3) ground truth in [0,1]
    mask: np.ndarray    # (H,W) in {0,1}
    camera: Camera

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=np.float64)
        h, w = self.camera.height, self.camera.width
        if self.image.shape != (h, w, 3):
            raise ValueError(f"image shape {self.image.shape} does not match camera {h}x{w}")
        if self.mask.shape != (h, w):
            raise ValueError(f"mask shape {self.mask.shape} does not match camera {h}x{w}")


@dataclass
class BoundScene:
    mesh: TriMesh
    config: BindingConfig
    gaussians: LocalGaussians

    def copy(self) -> "BoundScene":
        return BoundScene(self.mesh, self.config, self.gaussians.copy())


@dataclass
class FreeScene:
    gaussians: FreeGaussians

    def copy(self) -> "FreeScene":
        return FreeScene(self.gaussians.copy())


# Per-group Adam learning rates; the mean/position rate decays exponentially
# to 1% of its initial value over the run.
LEARNING_RATES = {
    "mean": 1.6e-4,
    "rotation": 1e-3,
    "log_scale": 5e-3,
    "opacity": 5e-2,
    "sh_dc": 2.5e-3,
    "sh_rest": 1.25e-4,
    "normal": 1e-3,
}
MEAN_LR_FINAL_FACTOR = 0.01
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-15

_GROUP_OF_PARAM = {
    "positions": "mean",
    "local_positions": "mean",
    "quats": "rotation",
    "local_quats": "rotation",
    "log_scales": "log_scale",
    "local_log_scales": "log_scale",
    "opacity_logits": "opacity",
    "normals": "normal",
}


class Adam:
    """Adam over named parameter arrays, updated in place."""

    def __init__(self, params: dict[str, np.ndarray], lrs: dict[str, float]):
        self.params = params
        self.lrs = lrs
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray], lr_scale: dict[str, float] | None = None):
        self.t += 1
        b1, b2 = ADAM_BETAS
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for name, g in grads.items():
            p = self.params[name]
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            lr = self.lrs[name]
            if lr_scale and name in lr_scale:
                lr = lr * lr_scale[name]
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)


def _split_sh_groups(arrays: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Replace the 'sh' entry with dc / rest slices (views into the array)."""
    out = {}
    for name, arr in arrays.items():
        if name == "sh":
            out["sh_dc"] = arr[:, :1]
            if arr.shape[1] > 1:
                out["sh_rest"] = arr[:, 1:]
        else:
            out[name] = arr
    return out


def _group_lrs(names, overrides=None) -> dict[str, float]:
    lrs = {}
    for name in names:
        group = name if name in ("sh_dc", "sh_rest") else _GROUP_OF_PARAM[name]
        lrs[name] = LEARNING_RATES[group]
    if overrides:
        for k, v in overrides.items():
            if k in lrs:
                lrs[k] = v
    return lrs


def evaluate_view(
    scene,
    view: TrainView,
    stage: int,
    weights: LossWeights,
    background,
    backend: str | None = None,
    want_grads: bool = True,
    frames=None,
):
    """One view's total loss, per-term values, and raw-parameter gradients."""
    if stage == 2:
        if not isinstance(scene, BoundScene):
            raise ValueError("stage 2 requires a bound scene")
        if frames is None:
            frames = compute_frames(scene.mesh)
        gaussians, bcache = to_global_with_cache(
            scene.gaussians, scene.mesh, scene.config, frames
        )
    else:
        if not isinstance(scene, FreeScene):
            raise ValueError("stage 1 operates on free Gaussians")
        gaussians = scene.gaussians.activated()
        bcache = None

    out, rcache = render.rasterize_with_cache(gaussians, view.camera, background, backend)

    terms = {}
    terms["l1"] = losses.l1_loss(out.color, view.image)
    if want_grads:
        g_color = weights.l1 * losses.l1_loss_grad(out.color, view.image)
    if weights.ssim != 0.0:
        if want_grads:
            terms["ssim"], g_ssim = losses.ssim_loss_with_grad(out.color, view.image)
            g_color = g_color + weights.ssim * g_ssim
        else:
            terms["ssim"] = losses.ssim_loss(out.color, view.image)
    else:
        terms["ssim"] = 0.0

    g_alpha = None
    if weights.mask != 0.0:
        terms["mask"] = losses.mask_entropy_loss(out.alpha, view.mask)
        if want_grads:
            g_alpha = weights.mask * losses.mask_entropy_loss_grad(out.alpha, view.mask)
    else:
        terms["mask"] = 0.0

    g_normal = None
    if stage == 1 and weights.normal != 0.0:
        # Pseudo-normal target is treated as constant (no gradient through depth).
        pseudo = render.pseudo_normal_from_depth(out.depth, view.camera, out.alpha)
        terms["normal"] = losses.normal_consistency_loss(out.normal, pseudo, out.alpha)
        if want_grads:
            g_normal = weights.normal * losses.normal_consistency_loss_grad(
                out.normal, pseudo, out.alpha
            )
    else:
        terms["normal"] = 0.0

    total = (
        weights.l1 * terms["l1"]
        + weights.ssim * terms["ssim"]
        + weights.normal * terms["normal"]
        + weights.mask * terms["mask"]
    )
    if not want_grads:
        return total, terms, None

    gg = render.backward_from_cache(rcache, g_color, None, g_normal, g_alpha)
    if stage == 2:
        lg = to_global_backward(bcache, gg)
        grads = {
            "local_positions": lg.local_positions,
            "local_quats": lg.local_quats,
            "local_log_scales": lg.local_log_scales,
            "opacity_logits": lg.opacity_logits,
            "sh": lg.sh,
        }
    else:
        grads = scene.gaussians.activation_backward(gg)
    return total, terms, grads


def evaluate_loss(scene, view, stage, weights, background, backend=None) -> float:
    """Forward-only total loss; the finite-difference oracle's workhorse."""
    total, _, _ = evaluate_view(scene, view, stage, weights, background, backend, want_grads=False)
    return total


def finite_diff_oracle(
    scene,
    view: TrainView,
    param: str,
    index,
    h: float = 1e-4,
    stage: int = 2,
    weights: LossWeights | None = None,
    background=(0.0, 0.0, 0.0),
    backend: str | None = None,
) -> float:
    """Central-difference d(loss)/d(param[index]) using forward passes only."""
    if h <= 0:
        raise ValueError("step size h must be positive")
    weights = weights or LossWeights.stage_defaults(stage)
    arr = scene.gaussians.param_arrays()[param]
    orig = arr[index]
    arr[index] = orig + h
    lp = evaluate_loss(scene, view, stage, weights, background, backend)
    arr[index] = orig - h
    lm = evaluate_loss(scene, view, stage, weights, background, backend)
    arr[index] = orig
    return (lp - lm) / (2.0 * h)


@dataclass
class FitResult:
    scene: object
    trace: list = field(default_factory=list)


def optimize(
    scene,
    views: list[TrainView],
    stage: int,
    steps: int,
    weights: LossWeights | None = None,
    background=(0.0, 0.0, 0.0),
    seed: int = 0,
    lr_overrides: dict[str, float] | None = None,
    trace_path=None,
    preview_every: int | None = None,
    preview_fn=None,
    backend: str | None = None,
) -> FitResult:
    """Fit a copy of the scene to the views; returns it plus the loss trace.

    Raises DivergenceError as soon as the total loss goes non-finite.  The
    mesh and bindings are never touched in stage 2.
    """
    if stage not in (1, 2):
        raise ValueError("stage must be 1 or 2")
    if not views:
        raise ValueError("need at least one training view")
    weights = weights or LossWeights.stage_defaults(stage)
    fitted = scene.copy()

    params = _split_sh_groups(fitted.gaussians.param_arrays())
    if stage == 2:
        params.pop("normals", None)
    opt = Adam(params, _group_lrs(params.keys(), lr_overrides))

    rng = np.random.default_rng(seed)
    frames = compute_frames(fitted.mesh) if stage == 2 else None
    trace = []
    trace_file = open(trace_path, "w") if trace_path else None
    if trace_file:
        trace_file.write("# step total l1 ssim normal mask\n")
    try:
        for step in range(steps):
            view = views[int(rng.integers(len(views)))]
            total, terms, grads = evaluate_view(
                fitted, view, stage, weights, background, backend, frames=frames
            )
            if not np.isfinite(total):
                raise DivergenceError(
                    f"non-finite loss at step {step}: total={total} terms={terms}"
                )
            mean_name = "local_positions" if stage == 2 else "positions"
            decay = MEAN_LR_FINAL_FACTOR ** (step / max(steps - 1, 1))
            opt.step(_split_sh_groups(grads), lr_scale={mean_name: decay})

            trace.append((step, total, terms))
            if trace_file:
                trace_file.write(
                    f"{step} {total:.8f} {terms['l1']:.8f} {terms['ssim']:.8f} "
                    f"{terms['normal']:.8f} {terms['mask']:.8f}\n"
                )
            if preview_every and preview_fn and (step + 1) % preview_every == 0:
                preview_fn(step, fitted)
    finally:
        if trace_file:
            trace_file.close()
    return FitResult(scene=fitted, trace=trace)


def train_psnr(scene, views, stage: int = 2, background=(0.0, 0.0, 0.0), backend=None) -> float:
    """Mean PSNR over the training views for the current parameters."""
    vals = []
    for view in views:
        if stage == 2:
            g = to_global_with_cache(scene.gaussians, scene.mesh, scene.config)[0]
        else:
            g = scene.gaussians.activated()
        out = render.rasterize(g, view.camera, background, backend)
        vals.append(losses.psnr(np.clip(out.color, 0.0, 1.0), view.image))
    return float(np.mean(vals))
