"""File formats: OBJ/PLY meshes, transforms.json cameras, PLY checkpoints,
PNG images, and deformed-mesh frame sequences.

Cameras on disk use the OpenGL convention (camera-to-world, -z forward,
y up); they are converted to the internal +z-forward world-to-camera form at
this boundary and never anywhere else.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .binding import BindingConfig, LocalGaussians
from .camera import Camera
from .errors import FileParseError, FormatVersionError, SchemaError, TopologyError
from .extract import OrientedPointSet
from .gaussians import FreeGaussians, sh_coeff_count
from .geometry import TriMesh, validate_correspondence

CHECKPOINT_VERSION = 1

_GL_FLIP = np.diag([1.0, -1.0, -1.0])


# --- OBJ ---------------------------------------------------------------


def read_obj(path) -> TriMesh:
    path = Path(path)
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    warned = False
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise FileParseError("vertex needs 3 coordinates", path, lineno)
                try:
                    vertices.append([float(p) for p in parts[1:4]])
                except ValueError:
                    raise FileParseError("bad vertex coordinate", path, lineno) from None
            elif tag == "f":
                if len(parts) < 4:
                    raise FileParseError("face needs at least 3 vertices", path, lineno)
                idx = []
                for token in parts[1:]:
                    first = token.split("/")[0]
                    try:
                        i = int(first)
                    except ValueError:
                        raise FileParseError(f"bad face index {token!r}", path, lineno) from None
                    idx.append(i - 1 if i > 0 else len(vertices) + i)
                if any(i < 0 or i >= len(vertices) for i in idx):
                    raise FileParseError("face index out of range", path, lineno)
                if len(idx) > 3 and not warned:
                    warnings.warn(f"{path}: fan-triangulating {len(idx)}-gon faces")
                    warned = True
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
            # all other tags (vn, vt, usemtl, ...) are ignored
    return TriMesh(
        np.array(vertices, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
    )


def write_obj(mesh: TriMesh, path) -> None:
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


# --- PLY (generic, binary little endian + ascii read) --------------------

_PLY_TYPES = {
    "char": "i1", "uchar": "u1", "short": "i2", "ushort": "u2",
    "int": "i4", "uint": "u4", "float": "f4", "double": "f8",
    "int8": "i1", "uint8": "u1", "int16": "i2", "uint16": "u2",
    "int32": "i4", "uint32": "u4", "float32": "f4", "float64": "f8",
}
_PLY_NAMES = {"i1": "char", "u1": "uchar", "i2": "short", "u2": "ushort",
              "i4": "int", "u4": "uint", "f4": "float", "f8": "double"}


@dataclass
class PlyElement:
    name: str
    count: int
    properties: list  # (name, dtype) or ("list", count_dtype, item_dtype, name)


def _parse_ply_header(fh, path):
    magic = fh.readline()
    if magic.strip() != b"ply":
        raise FileParseError("not a PLY file", path, 1)
    fmt = None
    comments = []
    elements: list[PlyElement] = []
    lineno = 1
    while True:
        raw = fh.readline()
        lineno += 1
        if not raw:
            raise FileParseError("unexpected end of header", path, lineno)
        line = raw.decode("ascii", errors="replace").strip()
        if line.startswith("format"):
            fmt = line.split()[1]
        elif line.startswith("comment"):
            comments.append(line[len("comment"):].strip())
        elif line.startswith("element"):
            _, name, count = line.split()
            elements.append(PlyElement(name, int(count), []))
        elif line.startswith("property"):
            parts = line.split()
            if not elements:
                raise FileParseError("property before element", path, lineno)
            if parts[1] == "list":
                elements[-1].properties.append(("list", parts[2], parts[3], parts[4]))
            else:
                if parts[1] not in _PLY_TYPES:
                    raise FileParseError(f"unknown type {parts[1]}", path, lineno)
                elements[-1].properties.append((parts[2], parts[1]))
        elif line == "end_header":
            break
    if fmt not in ("ascii", "binary_little_endian"):
        raise FileParseError(f"unsupported PLY format {fmt!r}", path, lineno)
    return fmt, comments, elements


def read_ply(path):
    """Parse a PLY file into {element name: data}, plus header comments.

    Scalar-only elements yield structured arrays; an element with a single
    list property yields a list of index arrays.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        fmt, comments, elements = _parse_ply_header(fh, path)
        data = {}
        for elem in elements:
            if any(p[0] == "list" for p in elem.properties):
                if len(elem.properties) != 1:
                    raise FileParseError(
                        f"element {elem.name}: mixed list/scalar properties unsupported", path
                    )
                _, cnt_t, item_t, _name = elem.properties[0]
                rows = []
                if fmt == "ascii":
                    for _ in range(elem.count):
                        parts = fh.readline().split()
                        if not parts:
                            raise FileParseError("truncated PLY data", path)
                        n = int(parts[0])
                        rows.append(np.array(parts[1 : 1 + n], dtype=_PLY_TYPES[item_t]))
                else:
                    cdt = np.dtype("<" + _PLY_TYPES[cnt_t])
                    idt = np.dtype("<" + _PLY_TYPES[item_t])
                    for _ in range(elem.count):
                        braw = fh.read(cdt.itemsize)
                        if len(braw) < cdt.itemsize:
                            raise FileParseError("truncated PLY data", path)
                        n = int(np.frombuffer(braw, dtype=cdt)[0])
                        body = fh.read(n * idt.itemsize)
                        if len(body) < n * idt.itemsize:
                            raise FileParseError("truncated PLY data", path)
                        rows.append(np.frombuffer(body, dtype=idt).copy())
                data[elem.name] = rows
            else:
                dtype = np.dtype([(n, "<" + _PLY_TYPES[t]) for n, t in elem.properties])
                if fmt == "ascii":
                    rows = []
                    for _ in range(elem.count):
                        parts = fh.readline().split()
                        if len(parts) < len(elem.properties):
                            raise FileParseError("truncated PLY data", path)
                        rows.append(tuple(parts[: len(elem.properties)]))
                    arr = np.array(rows, dtype=np.dtype("U32")).astype(object)
                    out = np.empty(elem.count, dtype=dtype)
                    for i, (n, t) in enumerate(elem.properties):
                        out[n] = arr[:, i].astype(_PLY_TYPES[t])
                    data[elem.name] = out
                else:
                    body = fh.read(elem.count * dtype.itemsize)
                    if len(body) < elem.count * dtype.itemsize:
                        raise FileParseError("truncated PLY data", path)
                    data[elem.name] = np.frombuffer(body, dtype=dtype).copy()
    return data, comments


def write_ply(path, elements, comments=()):
    """Write binary-little-endian PLY.

    `elements` maps an element name to either a structured array (scalar
    properties) or ("vertex_indices", int array (M,K)) for list properties.
    """
    with open(path, "wb") as fh:
        fh.write(b"ply\nformat binary_little_endian 1.0\n")
        for c in comments:
            fh.write(f"comment {c}\n".encode("ascii"))
        bodies = []
        for name, payload in elements.items():
            if isinstance(payload, tuple):
                prop_name, arr = payload
                arr = np.asarray(arr, dtype=np.int32)
                fh.write(f"element {name} {len(arr)}\n".encode("ascii"))
                fh.write(f"property list uchar int {prop_name}\n".encode("ascii"))
                counts = np.full(len(arr), arr.shape[1], dtype=np.uint8)
                rec = np.dtype([("n", "u1"), ("idx", "<i4", (arr.shape[1],))])
                body = np.empty(len(arr), dtype=rec)
                body["n"] = counts
                body["idx"] = arr
                bodies.append(body.tobytes())
            else:
                arr = payload
                fh.write(f"element {name} {len(arr)}\n".encode("ascii"))
                for field_name in arr.dtype.names:
                    kind = _PLY_NAMES[arr.dtype[field_name].str.lstrip("<>=|")]
                    fh.write(f"property {kind} {field_name}\n".encode("ascii"))
                le = arr.astype(
                    np.dtype([(n, "<" + arr.dtype[n].str.lstrip("<>=|")) for n in arr.dtype.names])
                )
                bodies.append(le.tobytes())
        fh.write(b"end_header\n")
        for body in bodies:
            fh.write(body)


def read_ply_mesh(path) -> TriMesh:
    data, _ = read_ply(path)
    if "vertex" not in data or "face" not in data:
        raise FileParseError("PLY mesh needs vertex and face elements", path)
    v = data["vertex"]
    vertices = np.stack([v["x"], v["y"], v["z"]], axis=1).astype(np.float64)
    faces = []
    warned = False
    for row in data["face"]:
        if len(row) < 3:
            raise FileParseError("face with fewer than 3 vertices", path)
        if len(row) > 3 and not warned:
            warnings.warn(f"{path}: fan-triangulating {len(row)}-gon faces")
            warned = True
        for k in range(1, len(row) - 1):
            faces.append([row[0], row[k], row[k + 1]])
    return TriMesh(vertices, np.array(faces, dtype=np.int64).reshape(-1, 3))


def write_ply_mesh(mesh: TriMesh, path) -> None:
    vert = np.empty(mesh.num_vertices, dtype=np.dtype([("x", "<f4"), ("y", "<f4"), ("z", "<f4")]))
    vert["x"], vert["y"], vert["z"] = mesh.vertices.T.astype(np.float32)
    write_ply(path, {"vertex": vert, "face": ("vertex_indices", mesh.faces)})


def read_mesh(path) -> TriMesh:
    """Dispatch on extension: .obj or .ply."""
    path = Path(path)
    if not path.exists():
        raise FileParseError("file not found", path)
    if path.suffix.lower() == ".obj":
        return read_obj(path)
    if path.suffix.lower() == ".ply":
        return read_ply_mesh(path)
    raise FileParseError(f"unsupported mesh format {path.suffix!r}", path)


def write_mesh(mesh: TriMesh, path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".obj":
        write_obj(mesh, path)
    elif path.suffix.lower() == ".ply":
        write_ply_mesh(mesh, path)
    else:
        raise FileParseError(f"unsupported mesh format {path.suffix!r}", path)


# --- oriented points ------------------------------------------------------


def write_oriented_points(points: OrientedPointSet, path) -> None:
    """Binary PLY with x,y,z,nx,ny,nz, consumable by screened-Poisson tools."""
    dtype = np.dtype([(n, "<f4") for n in ("x", "y", "z", "nx", "ny", "nz")])
    rec = np.empty(len(points.positions), dtype=dtype)
    for i, n in enumerate(("x", "y", "z")):
        rec[n] = points.positions[:, i].astype(np.float32)
    for i, n in enumerate(("nx", "ny", "nz")):
        rec[n] = points.normals[:, i].astype(np.float32)
    write_ply(path, {"vertex": rec})


def read_oriented_points(path) -> OrientedPointSet:
    data, _ = read_ply(path)
    v = data["vertex"]
    return OrientedPointSet(
        positions=np.stack([v["x"], v["y"], v["z"]], axis=1).astype(np.float64),
        normals=np.stack([v["nx"], v["ny"], v["nz"]], axis=1).astype(np.float64),
    )


# --- cameras (transforms.json) --------------------------------------------


def _camera_from_c2w_gl(c2w: np.ndarray, width, height, fx, fy, cx, cy) -> Camera:
    rot_c2w = c2w[:3, :3] @ _GL_FLIP  # OpenGL (-z fwd, y up) -> +z fwd, y down
    w2c = np.eye(4)
    w2c[:3, :3] = rot_c2w.T
    w2c[:3, 3] = -rot_c2w.T @ c2w[:3, 3]
    return Camera(width=width, height=height, fx=fx, fy=fy, cx=cx, cy=cy, world_to_camera=w2c)


def _camera_to_c2w_gl(cam: Camera) -> np.ndarray:
    c2w = np.eye(4)
    c2w[:3, :3] = cam.rotation.T @ _GL_FLIP
    c2w[:3, 3] = cam.center()
    return c2w


def read_camera_dataset(path) -> tuple[list[Camera], list[str | None]]:
    """Cameras plus per-frame image paths from a transforms.json file."""
    path = Path(path)
    if not path.exists():
        raise FileParseError("file not found", path)
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FileParseError(f"invalid JSON: {exc}", path) from None
    if "camera_angle_x" not in data:
        raise SchemaError(f"{path}: missing camera_angle_x")
    frames = data.get("frames")
    if not frames:
        raise SchemaError(f"{path}: missing or empty frames list")

    width = int(data.get("w", 0))
    height = int(data.get("h", 0))
    if not width or not height:
        first = frames[0].get("file_path")
        img = _resolve_image_path(path.parent, first) if first else None
        if img is None:
            raise SchemaError(f"{path}: no w/h keys and no readable frame image for size")
        with Image.open(img) as im:
            width, height = im.size

    fx = 0.5 * width / np.tan(0.5 * float(data["camera_angle_x"]))
    cameras = []
    paths: list[str | None] = []
    for i, frame in enumerate(frames):
        if "transform_matrix" not in frame:
            raise SchemaError(f"{path}: frame {i} missing transform_matrix")
        c2w = np.asarray(frame["transform_matrix"], dtype=np.float64)
        if c2w.shape != (4, 4):
            raise SchemaError(f"{path}: frame {i} transform_matrix is not 4x4")
        cameras.append(
            _camera_from_c2w_gl(c2w, width, height, fx, fx, width / 2.0, height / 2.0)
        )
        fp = frame.get("file_path")
        paths.append(str(_resolve_image_path(path.parent, fp)) if fp else None)
    return cameras, paths


def read_cameras(path) -> list[Camera]:
    return read_camera_dataset(path)[0]


def _resolve_image_path(root: Path, file_path: str) -> Path | None:
    p = Path(file_path)
    candidates = [root / p, root / (str(p) + ".png"), Path(file_path), Path(str(p) + ".png")]
    for c in candidates:
        if c.exists():
            return c
    return None


def write_camera_dataset(path, cameras: list[Camera], file_paths=None) -> None:
    cam0 = cameras[0]
    angle_x = 2.0 * np.arctan(0.5 * cam0.width / cam0.fx)
    frames = []
    for i, cam in enumerate(cameras):
        frame = {"transform_matrix": _camera_to_c2w_gl(cam).tolist()}
        if file_paths is not None:
            frame["file_path"] = file_paths[i]
        frames.append(frame)
    with open(path, "w") as fh:
        json.dump(
            {
                "camera_angle_x": float(angle_x),
                "w": cam0.width,
                "h": cam0.height,
                "frames": frames,
            },
            fh,
            indent=1,
        )


# --- checkpoints ------------------------------------------------------------


@dataclass
class Checkpoint:
    """Persisted Gaussians: bound (LocalGaussians + BindingConfig) or free."""

    gaussians: LocalGaussians | FreeGaussians
    config: BindingConfig | None = None

    @property
    def kind(self) -> str:
        return "bound" if isinstance(self.gaussians, LocalGaussians) else "free"


def _sh_fields(k: int):
    return [f"sh_{i}" for i in range(3 * k)]


def write_checkpoint(ckpt: Checkpoint, path) -> None:
    g = ckpt.gaussians
    k = g.sh.shape[1]
    comments = [
        f"trisplat_checkpoint version {CHECKPOINT_VERSION}",
        f"kind {ckpt.kind}",
        f"sh_degree {g.sh_degree}",
    ]
    fields: list[tuple[str, str]] = []
    if ckpt.kind == "bound":
        cfg = ckpt.config
        bary = ";".join(",".join(f"{w!r}" for w in row) for row in cfg.barycentric)
        comments += [
            f"mode {cfg.mode}",
            f"beta {cfg.beta!r}",
            f"n_per_tri {cfg.n_per_triangle}",
            f"flat_eps {cfg.flat_thickness!r}",
            f"barycentric {bary}",
        ]
        fields.append(("tri_idx", "<i4"))
        fields += [(n, "<f4") for n in ("lx", "ly", "lz")]
    else:
        fields += [(n, "<f4") for n in ("x", "y", "z", "nx", "ny", "nz")]
    fields += [(n, "<f4") for n in ("qw", "qx", "qy", "qz", "lsx", "lsy", "lsz", "op")]
    fields += [(n, "<f4") for n in _sh_fields(k)]

    rec = np.empty(len(g), dtype=np.dtype(fields))
    if ckpt.kind == "bound":
        rec["tri_idx"] = g.tri_indices.astype(np.int32)
        for i, n in enumerate(("lx", "ly", "lz")):
            rec[n] = g.local_positions[:, i].astype(np.float32)
        quats, log_scales = g.local_quats, g.local_log_scales
    else:
        for i, n in enumerate(("x", "y", "z")):
            rec[n] = g.positions[:, i].astype(np.float32)
        for i, n in enumerate(("nx", "ny", "nz")):
            rec[n] = g.normals[:, i].astype(np.float32)
        quats, log_scales = g.quats, g.log_scales
    for i, n in enumerate(("qw", "qx", "qy", "qz")):
        rec[n] = quats[:, i].astype(np.float32)
    for i, n in enumerate(("lsx", "lsy", "lsz")):
        rec[n] = log_scales[:, i].astype(np.float32)
    rec["op"] = g.opacity_logits.astype(np.float32)
    flat_sh = g.sh.reshape(len(g), -1)  # coefficient-major, RGB interleaved
    for i, n in enumerate(_sh_fields(k)):
        rec[n] = flat_sh[:, i].astype(np.float32)
    write_ply(path, {"gaussian": rec}, comments=comments)


def _parse_comment_map(comments) -> dict[str, str]:
    out = {}
    for c in comments:
        parts = c.split(None, 1)
        if len(parts) == 2:
            out[parts[0]] = parts[1]
    return out


def read_checkpoint(path, allow_empty: bool = False) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileParseError("file not found", path)
    data, comments = read_ply(path)
    meta = _parse_comment_map(comments)
    if "trisplat_checkpoint" not in meta:
        raise FileParseError("not a trisplat checkpoint (missing header comment)", path)
    m = re.match(r"version\s+(\d+)", meta["trisplat_checkpoint"])
    if not m or int(m.group(1)) != CHECKPOINT_VERSION:
        raise FormatVersionError(
            f"{path}: unsupported checkpoint version {meta['trisplat_checkpoint']!r}"
        )
    if "gaussian" not in data:
        raise FileParseError("missing gaussian element", path)
    rec = data["gaussian"]
    if len(rec) == 0 and not allow_empty:
        raise FileParseError("checkpoint has no Gaussian records", path)
    names = rec.dtype.names
    sh_names = sorted((n for n in names if n.startswith("sh_")), key=lambda s: int(s[3:]))
    degree = int(meta.get("sh_degree", "0"))
    if len(sh_names) != 3 * sh_coeff_count(degree):
        raise SchemaError(
            f"{path}: {len(sh_names)} SH fields inconsistent with declared degree {degree}"
        )
    n = len(rec)
    sh = np.stack([rec[s].astype(np.float64) for s in sh_names], axis=1).reshape(
        n, sh_coeff_count(degree), 3
    )
    quats = np.stack([rec[c].astype(np.float64) for c in ("qw", "qx", "qy", "qz")], axis=1)
    log_scales = np.stack([rec[c].astype(np.float64) for c in ("lsx", "lsy", "lsz")], axis=1)
    op = rec["op"].astype(np.float64)

    kind = meta.get("kind", "bound" if "tri_idx" in names else "free")
    if kind == "bound":
        for key in ("mode", "beta", "n_per_tri"):
            if key not in meta:
                raise SchemaError(f"{path}: checkpoint header missing {key}")
        bary = None
        if "barycentric" in meta:
            bary = np.array(
                [[float(x) for x in row.split(",")] for row in meta["barycentric"].split(";")]
            )
        cfg = BindingConfig(
            mode=meta["mode"],
            n_per_triangle=int(meta["n_per_tri"]),
            beta=float(meta["beta"]),
            barycentric=bary,
            flat_thickness=float(meta.get("flat_eps", "1e-4")),
            sh_degree=degree,
        )
        gaussians = LocalGaussians(
            tri_indices=rec["tri_idx"].astype(np.int64),
            local_positions=np.stack(
                [rec[c].astype(np.float64) for c in ("lx", "ly", "lz")], axis=1
            ),
            local_quats=quats,
            local_log_scales=log_scales,
            opacity_logits=op,
            sh=sh,
        )
        return Checkpoint(gaussians=gaussians, config=cfg)

    gaussians = FreeGaussians(
        positions=np.stack([rec[c].astype(np.float64) for c in ("x", "y", "z")], axis=1),
        quats=quats,
        log_scales=log_scales,
        opacity_logits=op,
        sh=sh,
        normals=np.stack([rec[c].astype(np.float64) for c in ("nx", "ny", "nz")], axis=1),
    )
    return Checkpoint(gaussians=gaussians, config=None)


# --- images -----------------------------------------------------------------


def write_image(image: np.ndarray, path) -> None:
    """Float [0,1] image -> 8-bit PNG (grayscale, RGB, or RGBA)."""
    arr = np.asarray(image, dtype=np.float64)
    data = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(data).save(path)


def read_image(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileParseError("file not found", path)
    with Image.open(path) as im:
        return np.asarray(im, dtype=np.float64) / 255.0


def write_depth_png(depth: np.ndarray, path, scale: float = 10.0) -> None:
    """Depth map -> 16-bit grayscale PNG; values clamp at `scale` scene units."""
    data = np.floor(np.clip(depth / scale, 0.0, 1.0) * 65535.0 + 0.5).astype(np.uint16)
    Image.fromarray(data, mode="I;16").save(path)


def read_depth_png(path, scale: float = 10.0) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im, dtype=np.float64) / 65535.0 * scale


# --- frame sequences ----------------------------------------------------------

_FRAME_RE = re.compile(r"frame_(\d{4})\.obj$")


def read_frame_sequence(directory) -> list[TriMesh]:
    """Numbered frame_%04d.obj files with frame-0 topology enforced throughout."""
    directory = Path(directory)
    found = {}
    for p in directory.glob("frame_*.obj"):
        m = _FRAME_RE.search(p.name)
        if m:
            found[int(m.group(1))] = p
    if not found:
        raise FileParseError("no frame_%04d.obj files found", directory)
    expected = range(len(found))
    missing = sorted(set(expected) - set(found))
    if missing:
        raise FileParseError(f"missing frame indices: {missing}", directory)
    meshes = []
    for i in expected:
        mesh = read_obj(found[i])
        if i > 0 and not validate_correspondence(meshes[0], mesh):
            raise TopologyError(f"frame {i} ({found[i].name}) does not match frame 0 topology")
        meshes.append(mesh)
    return meshes


# --- scene bundle --------------------------------------------------------------


@dataclass
class SceneBundle:
    mesh: TriMesh
    checkpoint: Checkpoint
    cameras: list[Camera]
    image_paths: list[str | None]
    background: np.ndarray


def load_bundle(path) -> SceneBundle:
    """JSON bundle {mesh, checkpoint, cameras, background?}; paths are
    relative to the bundle file."""
    path = Path(path)
    if not path.exists():
        raise FileParseError("file not found", path)
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FileParseError(f"invalid JSON: {exc}", path) from None
    for key in ("mesh", "checkpoint", "cameras"):
        if key not in spec:
            raise SchemaError(f"{path}: bundle missing {key!r}")
    root = path.parent
    mesh = read_mesh(root / spec["mesh"])
    ckpt = read_checkpoint(root / spec["checkpoint"])
    cameras, image_paths = read_camera_dataset(root / spec["cameras"])
    if ckpt.kind == "bound" and len(ckpt.gaussians) and ckpt.gaussians.tri_indices.max() >= mesh.num_faces:
        raise TopologyError(f"{path}: checkpoint references faces beyond mesh size")
    background = np.asarray(spec.get("background", [0.0, 0.0, 0.0]), dtype=np.float64)
    return SceneBundle(
        mesh=mesh,
        checkpoint=ckpt,
        cameras=cameras,
        image_paths=image_paths,
        background=background,
    )
