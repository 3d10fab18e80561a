"""Command-line surface: bind, fit, render, extract-mesh, eval.

Every flag can also come from a key=value config file (--config); explicit
flags win.  All structured errors go to stderr as `error: <category>: ...`
and exit with status 1.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import fileio, render
from .binding import BindingConfig, adapt_all, init_binding, to_global
from .camera import Camera
from .errors import ConfigError, SchemaError, TriSplatError
from .extract import build_occupancy, export_oriented_points, marching_cube
from .fit import BoundScene, FreeScene, LossWeights, TrainView, optimize
from .gaussians import FreeGaussians
from .geometry import TriMesh, validate_correspondence
from .losses import psnr, ssim


def _parse_config_file(path: str) -> dict:
    values = {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        val = val.strip().strip('"').strip("'")
        if val.lower() in ("true", "false"):
            values[key] = val.lower() == "true"
            continue
        try:
            values[key] = int(val)
            continue
        except ValueError:
            pass
        try:
            values[key] = float(val)
            continue
        except ValueError:
            pass
        values[key] = val
    return values


def _apply_config(args: argparse.Namespace, defaults: dict) -> argparse.Namespace:
    """Fill None-valued options from --config, then from hard defaults."""
    config = _parse_config_file(args.config) if getattr(args, "config", None) else {}
    for key, hard in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, config.get(key, hard))
    return args


def _parse_bg(value) -> np.ndarray:
    if isinstance(value, str):
        named = {"black": "0,0,0", "white": "1,1,1", "gray": "0.5,0.5,0.5"}
        value = named.get(value.lower(), value)
        parts = [float(x) for x in value.split(",")]
    else:
        parts = [float(value)] * 3
    if len(parts) != 3:
        raise ConfigError(f"background must be r,g,b, got {value!r}")
    return np.array(parts)


# --- bind -------------------------------------------------------------------

_BIND_DEFAULTS = dict(
    mode="shape-aware", per_tri=3, beta=10.0, flat_eps=1e-4, sh_degree=2
)


def cmd_bind(args) -> int:
    _apply_config(args, _BIND_DEFAULTS)
    if args.per_tri < 1:
        raise ConfigError("--per-tri must be >= 1")
    mesh = fileio.read_mesh(args.mesh)
    cfg = BindingConfig(
        mode=args.mode,
        n_per_triangle=args.per_tri,
        beta=args.beta,
        flat_thickness=args.flat_eps,
        sh_degree=args.sh_degree,
    )
    local = init_binding(mesh, cfg)
    fileio.write_checkpoint(fileio.Checkpoint(gaussians=local, config=cfg), args.out)
    print(f"bound {len(local)} Gaussians ({cfg.n_per_triangle} per face) -> {args.out}")
    return 0


# --- fit --------------------------------------------------------------------

_FIT_DEFAULTS = dict(stage=2, steps=2000, res=0, seed=0, bg=None, threads=0)


def _load_views(bundle: fileio.SceneBundle, res: int, background) -> list[TrainView]:
    views = []
    for cam, img_path in zip(bundle.cameras, bundle.image_paths):
        if img_path is None:
            raise SchemaError("camera dataset has frames without file_path; cannot fit")
        img = fileio.read_image(img_path)
        if img.ndim == 2:
            img = np.repeat(img[..., None], 3, axis=2)
        if img.shape[2] == 4:
            alpha = img[..., 3]
            rgb = img[..., :3] * alpha[..., None] + background * (1.0 - alpha[..., None])
            mask = (alpha > 0.5).astype(np.float64)
        else:
            rgb = img[..., :3]
            mask = np.ones(img.shape[:2])
        if res and (cam.width != res or cam.height != res):
            cam, rgb, mask = _resize_view(cam, rgb, mask, res)
        views.append(TrainView(image=rgb, mask=mask, camera=cam))
    return views


def _resize_view(cam: Camera, rgb, mask, res: int):
    from PIL import Image

    sx, sy = res / cam.width, res / cam.height
    cam2 = Camera(
        width=res, height=res, fx=cam.fx * sx, fy=cam.fy * sy,
        cx=cam.cx * sx, cy=cam.cy * sy, world_to_camera=cam.world_to_camera.copy(),
    )
    rgb8 = Image.fromarray(np.floor(np.clip(rgb, 0, 1) * 255 + 0.5).astype(np.uint8))
    rgb2 = np.asarray(rgb8.resize((res, res), Image.BILINEAR), dtype=np.float64) / 255.0
    m8 = Image.fromarray((mask * 255).astype(np.uint8))
    mask2 = (np.asarray(m8.resize((res, res), Image.BILINEAR), dtype=np.float64) / 255.0 > 0.5)
    return cam2, rgb2, mask2.astype(np.float64)


def cmd_fit(args) -> int:
    _apply_config(args, _FIT_DEFAULTS)
    bundle = fileio.load_bundle(args.scene)
    background = _parse_bg(args.bg) if args.bg is not None else bundle.background
    out = Path(args.out)

    if args.steps == 0:
        fileio.write_checkpoint(bundle.checkpoint, out)
        print(f"0 steps: copied input checkpoint -> {out}")
        return 0

    if args.stage == 2:
        if bundle.checkpoint.kind != "bound":
            raise ConfigError("stage 2 needs a bound checkpoint")
        scene = BoundScene(
            mesh=bundle.mesh,
            config=bundle.checkpoint.config,
            gaussians=bundle.checkpoint.gaussians,
        )
    else:
        if bundle.checkpoint.kind != "free":
            raise ConfigError("stage 1 needs a free-Gaussian checkpoint")
        scene = FreeScene(gaussians=bundle.checkpoint.gaussians)

    views = _load_views(bundle, args.res, background)
    preview_dir = Path(args.preview_dir) if args.preview_dir else out.parent / (out.stem + "_previews")
    preview_dir.mkdir(parents=True, exist_ok=True)
    preview_every = max(args.steps // 20, 1)

    def preview(step, current):
        if isinstance(current, BoundScene):
            g = to_global(current.gaussians, current.mesh, current.config)
        else:
            g = current.gaussians.activated()
        img = render.rasterize(g, views[0].camera, background).color
        fileio.write_image(np.clip(img, 0, 1), preview_dir / f"step_{step + 1:06d}.png")

    result = optimize(
        scene,
        views,
        stage=args.stage,
        steps=args.steps,
        weights=LossWeights.stage_defaults(args.stage),
        background=background,
        seed=args.seed,
        trace_path=out.with_suffix(".trace.txt"),
        preview_every=preview_every,
        preview_fn=preview,
    )
    fitted = result.scene
    if isinstance(fitted, BoundScene):
        ckpt = fileio.Checkpoint(gaussians=fitted.gaussians, config=fitted.config)
    else:
        ckpt = fileio.Checkpoint(gaussians=fitted.gaussians)
    fileio.write_checkpoint(ckpt, out)
    final = result.trace[-1][1] if result.trace else float("nan")
    print(f"fit stage {args.stage}, {args.steps} steps, final loss {final:.6f} -> {out}")
    return 0


# --- render -------------------------------------------------------------------

_RENDER_DEFAULTS = dict(bg="0,0,0", camera_index=0, aux=False, depth_scale=10.0, threads=0)


def _scene_globals(bundle: fileio.SceneBundle, mesh=None):
    ckpt = bundle.checkpoint
    if ckpt.kind == "bound":
        return to_global(ckpt.gaussians, mesh if mesh is not None else bundle.mesh, ckpt.config)
    return ckpt.gaussians.activated()


def cmd_render(args) -> int:
    _apply_config(args, _RENDER_DEFAULTS)
    bundle = fileio.load_bundle(args.scene)
    cameras = fileio.read_cameras(args.cameras) if args.cameras else bundle.cameras
    background = _parse_bg(args.bg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def save(tag: str, result: render.RenderOutput):
        fileio.write_image(np.clip(result.color, 0, 1), out / f"{tag}.png")
        if args.aux:
            fileio.write_depth_png(result.depth, out / f"{tag}_depth.png", args.depth_scale)
            fileio.write_image((result.normal + 1.0) * 0.5, out / f"{tag}_normal.png")
            fileio.write_image(result.alpha, out / f"{tag}_alpha.png")

    if args.frames:
        ckpt = bundle.checkpoint
        if ckpt.kind != "bound":
            raise ConfigError("--frames requires a bound checkpoint")
        meshes = fileio.read_frame_sequence(args.frames)
        if not validate_correspondence(bundle.mesh, meshes[0]):
            raise ConfigError("frame sequence topology does not match the scene mesh")
        cam = cameras[args.camera_index % len(cameras)]
        for k, mesh_k in enumerate(meshes):
            g = adapt_all(ckpt.gaussians, mesh_k, ckpt.config, original_mesh=bundle.mesh)
            save(f"frame_{k:04d}", render.rasterize(g, cam, background))
        print(f"rendered {len(meshes)} deformed frames -> {out}")
    else:
        g = _scene_globals(bundle)
        for i, cam in enumerate(cameras):
            save(f"render_{i:04d}", render.rasterize(g, cam, background))
        print(f"rendered {len(cameras)} views -> {out}")
    return 0


# --- extract-mesh ----------------------------------------------------------------

_EXTRACT_DEFAULTS = dict(method="mc", res=64, tau=0.01, iso=1e-4, placement="midpoint")


def cmd_extract_mesh(args) -> int:
    _apply_config(args, _EXTRACT_DEFAULTS)
    ckpt = fileio.read_checkpoint(args.ckpt, allow_empty=True)
    if ckpt.kind != "free":
        raise ConfigError("mesh extraction needs a free-Gaussian checkpoint")
    free: FreeGaussians = ckpt.gaussians

    if args.method == "poisson-export":
        points = export_oriented_points(free)
        fileio.write_oriented_points(points, args.out)
        print(f"exported {len(points.positions)} oriented points -> {args.out}")
        return 0
    if args.method != "mc":
        raise ConfigError(f"unknown extraction method {args.method!r}")

    if len(free) == 0:
        warnings.warn("empty checkpoint: writing an empty mesh")
        fileio.write_mesh(TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64)), args.out)
        return 0
    grid = build_occupancy(free.positions, resolution=args.res, tau=args.tau)
    mesh = marching_cube(grid, iso=args.iso, placement=args.placement)
    if mesh.num_faces == 0:
        warnings.warn("marching cubes produced no surface; writing an empty mesh")
    fileio.write_mesh(mesh, args.out)
    print(f"extracted mesh: {mesh.num_vertices} vertices, {mesh.num_faces} faces -> {args.out}")
    return 0


# --- eval -------------------------------------------------------------------------


def cmd_eval(args) -> int:
    renders = sorted(Path(args.renders).glob("*.png"))
    if not renders:
        raise ConfigError(f"no PNG files in {args.renders}")
    gt_dir = Path(args.gt)
    psnrs, ssims = [], []
    for rp in renders:
        gp = gt_dir / rp.name
        if not gp.exists():
            raise ConfigError(f"missing ground-truth counterpart for {rp.name}")
        a = fileio.read_image(rp)[..., :3]
        b = fileio.read_image(gp)[..., :3]
        if a.shape != b.shape:
            raise ConfigError(f"{rp.name}: size mismatch {a.shape} vs {b.shape}")
        p, s = psnr(a, b), ssim(a, b)
        psnrs.append(p)
        ssims.append(s)
        print(f"{rp.name} psnr={p:.4f} ssim={s:.6f}")
    print(f"mean psnr={np.mean(psnrs):.4f} ssim={np.mean(ssims):.6f}")
    return 0


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trisplat",
        description="Bind 3D Gaussians to triangle meshes, fit them to images, "
        "and re-render under mesh manipulation with no retraining.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bind", help="initialize mesh-bound Gaussians")
    p.add_argument("--mesh", required=True)
    p.add_argument("--mode", choices=("shape-aware", "shape-aware-no-adaption",
                                      "on-mesh-flat", "mesh-offset"))
    p.add_argument("--per-tri", type=int, dest="per_tri")
    p.add_argument("--beta", type=float)
    p.add_argument("--flat-eps", type=float, dest="flat_eps")
    p.add_argument("--sh-degree", type=int, dest="sh_degree")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_bind)

    p = sub.add_parser("fit", help="optimize Gaussian attributes against views")
    p.add_argument("--scene", required=True, help="bundle.json")
    p.add_argument("--stage", type=int, choices=(1, 2))
    p.add_argument("--steps", type=int)
    p.add_argument("--res", type=int, help="fit at this square resolution")
    p.add_argument("--seed", type=int)
    p.add_argument("--bg", help="background r,g,b (default: bundle)")
    p.add_argument("--out", required=True)
    p.add_argument("--preview-dir", dest="preview_dir")
    p.add_argument("--threads", type=int, help="worker cap (results are identical)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("render", help="render views, optionally over deformed frames")
    p.add_argument("--scene", required=True)
    p.add_argument("--cameras", help="transforms.json overriding the bundle's cameras")
    p.add_argument("--frames", help="directory of frame_%%04d.obj deformed meshes")
    p.add_argument("--camera-index", type=int, dest="camera_index")
    p.add_argument("--bg")
    p.add_argument("--aux", action="store_const", const=True, help="also write depth/normal/alpha")
    p.add_argument("--depth-scale", type=float, dest="depth_scale")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, help="worker cap (results are identical)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("extract-mesh", help="mesh from free Gaussians (marching cubes / oriented points)")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--method", choices=("mc", "poisson-export"))
    p.add_argument("--res", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--iso", type=float)
    p.add_argument("--placement", choices=("midpoint", "interp"))
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_extract_mesh)

    p = sub.add_parser("eval", help="PSNR/SSIM report of renders against ground truth")
    p.add_argument("--renders", required=True)
    p.add_argument("--gt", required=True)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TriSplatError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: runtime: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
