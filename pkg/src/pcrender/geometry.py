"""Point-cloud and camera data model, PLY ingestion, pinhole projection,
frustum culling, and synthetic desk-scale scenes.

Positions are world-frame meters (float64); color features live in [0, 1]
with 8-bit quantization only at the file boundary. The camera model is a
plain pinhole: pixel = (fx*X/Z + cx, fy*Y/Z + cy) in camera frame, depth = Z.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

VALID_SCENES = ("box_room", "checker_walls", "sphere_field")

_ROT_TOL = 1e-6


class PlyParseError(ValueError):
    """Raised for malformed PLY content; the message names the bad line."""


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image size must be positive, got {self.width}x{self.height}")


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera rigid transform stored as a 3x4 row-major matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 4):
            raise ValueError(f"pose matrix must be 3x4, got {m.shape}")
        r = m[:, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=_ROT_TOL):
            raise ValueError("pose rotation block is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > _ROT_TOL:
            raise ValueError(f"pose rotation determinant must be +1, got {np.linalg.det(r)}")
        object.__setattr__(self, "matrix", m)

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:, 3]

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.hstack([np.eye(3), np.zeros((3, 1))]))

    @classmethod
    def look_at(cls, eye, target, up=(0.0, 1.0, 0.0)) -> "CameraPose":
        """Pose with +z pointing from ``eye`` toward ``target``."""
        eye = np.asarray(eye, dtype=np.float64)
        z = np.asarray(target, dtype=np.float64) - eye
        nz = np.linalg.norm(z)
        if nz < 1e-12:
            raise ValueError("look_at target coincides with eye")
        z = z / nz
        up = np.asarray(up, dtype=np.float64)
        x = np.cross(up, z)
        if np.linalg.norm(x) < 1e-8:
            x = np.cross(np.array([0.0, 0.0, 1.0]), z)
        x = x / np.linalg.norm(x)
        y = np.cross(z, x)
        r = np.stack([x, y, z])
        return cls(np.hstack([r, (-r @ eye)[:, None]]))


class CameraView(NamedTuple):
    intrinsics: CameraIntrinsics
    pose: CameraPose


@dataclass(frozen=True)
class Frustum:
    near: float = 0.1
    far: float = 10.0

    def __post_init__(self):
        if not 0 < self.near < self.far:
            raise ValueError(f"need 0 < near < far, got near={self.near}, far={self.far}")


@dataclass
class PointCloud:
    """Ordered point set: ``positions`` (N, 3) and color ``features`` (N, C)."""

    positions: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or len(self.features) != len(self.positions):
            raise ValueError(
                f"features shape {self.features.shape} does not match {len(self.positions)} points")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("point positions must be finite")
        if len(self.features) and (not np.all(np.isfinite(self.features))
                                   or self.features.min() < 0.0 or self.features.max() > 1.0):
            raise ValueError("point features must be finite and within [0, 1]")

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def num_channels(self) -> int:
        return self.features.shape[1]

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned (min, max) corners over all points."""
        if not len(self):
            raise ValueError("empty cloud has no bounds")
        return self.positions.min(axis=0), self.positions.max(axis=0)

    def subset(self, index) -> "PointCloud":
        return PointCloud(self.positions[index], self.features[index])


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

def camera_frame(positions: np.ndarray, view: CameraView) -> np.ndarray:
    """World positions (N, 3) mapped into the camera frame."""
    p = view.pose
    return np.asarray(positions, dtype=np.float64) @ p.rotation.T + p.translation


def project_points(positions: np.ndarray, view: CameraView) -> tuple[np.ndarray, np.ndarray]:
    """Pinhole projection of (N, 3) world points.

    Returns continuous pixel coordinates (N, 2) as (u, v) and camera-frame
    depths (N,). Points at or behind the camera (Z <= 0) get NaN pixels;
    callers filter on depth.
    """
    cam = camera_frame(positions, view)
    k = view.intrinsics
    z = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(z > 0, k.fx * cam[:, 0] / z + k.cx, np.nan)
        v = np.where(z > 0, k.fy * cam[:, 1] / z + k.cy, np.nan)
    return np.stack([u, v], axis=1), z


def project(position, view: CameraView):
    """Single-point projection: ((u, v), depth), or (None, depth) behind camera."""
    pix, z = project_points(np.asarray(position, dtype=np.float64)[None, :], view)
    depth = float(z[0])
    if depth <= 0:
        return None, depth
    return pix[0], depth


def backproject(pixel, depth: float, view: CameraView) -> np.ndarray:
    """Invert ``project`` using the returned depth; recovers the world point."""
    k = view.intrinsics
    u, v = float(pixel[0]), float(pixel[1])
    cam = np.array([(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth])
    p = view.pose
    return p.rotation.T @ (cam - p.translation)


def visibility_mask(cloud: PointCloud, view: CameraView, frustum: Frustum) -> np.ndarray:
    """Boolean mask of points inside the frustum and the image rectangle.

    Depth bounds are closed ([near, far]); image bounds are half-open
    ([0, width) x [0, height)).
    """
    pix, z = project_points(cloud.positions, view)
    k = view.intrinsics
    with np.errstate(invalid="ignore"):
        ok = (z >= frustum.near) & (z <= frustum.far)
        ok &= (pix[:, 0] >= 0) & (pix[:, 0] < k.width)
        ok &= (pix[:, 1] >= 0) & (pix[:, 1] < k.height)
    return ok


def frustum_cull(cloud: PointCloud, view: CameraView, frustum: Frustum) -> PointCloud:
    """Order-preserving subset of points visible to ``view``."""
    mask = visibility_mask(cloud, view, frustum)
    if not mask.any():
        warnings.warn("frustum_cull: no points visible; result renders as a black frame")
    return cloud.subset(mask)


# ---------------------------------------------------------------------------
# PLY I/O
# ---------------------------------------------------------------------------

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def _parse_ply_header(fh):
    lines = []
    magic = fh.readline()
    lines.append(magic)
    if magic.strip() != b"ply":
        raise PlyParseError(f"line 1: expected 'ply' magic, got {magic!r}")
    fmt = None
    elements = []  # (name, count, [(prop_name, np_type), ...])
    lineno = 1
    while True:
        raw = fh.readline()
        lineno += 1
        if not raw:
            raise PlyParseError(f"line {lineno}: header ended before end_header")
        line = raw.decode("ascii", errors="replace").strip()
        if not line or line.startswith("comment") or line.startswith("obj_info"):
            continue
        parts = line.split()
        if parts[0] == "format":
            if len(parts) != 3 or parts[1] not in ("ascii", "binary_little_endian"):
                raise PlyParseError(f"line {lineno}: unsupported format declaration {line!r}")
            fmt = parts[1]
        elif parts[0] == "element":
            if len(parts) != 3:
                raise PlyParseError(f"line {lineno}: malformed element declaration {line!r}")
            try:
                count = int(parts[2])
            except ValueError:
                raise PlyParseError(f"line {lineno}: element count is not an integer in {line!r}")
            elements.append((parts[1], count, []))
        elif parts[0] == "property":
            if not elements:
                raise PlyParseError(f"line {lineno}: property before any element in {line!r}")
            if parts[1] == "list":
                elements[-1][2].append((parts[-1], "list", tuple(parts[2:4])))
            elif len(parts) == 3 and parts[1] in _PLY_TYPES:
                elements[-1][2].append((parts[2], _PLY_TYPES[parts[1]], None))
            else:
                raise PlyParseError(f"line {lineno}: unsupported property in {line!r}")
        elif parts[0] == "end_header":
            break
        else:
            raise PlyParseError(f"line {lineno}: unrecognized header line {line!r}")
    if fmt is None:
        raise PlyParseError("header is missing a format declaration")
    return fmt, elements, lineno


def load_ply(path, synthetic_colors: bool = False) -> PointCloud:
    """Read a PLY point cloud (ascii or binary little-endian).

    Expects a ``vertex`` element carrying float x, y, z and uchar
    red, green, blue. Colors are normalized to [0, 1]; point order is
    preserved. When colors are absent and ``synthetic_colors`` is set,
    every point gets neutral gray (0.5) instead of an error.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        fmt, elements, header_lines = _parse_ply_header(fh)
        vertex = next((e for e in elements if e[0] == "vertex"), None)
        if vertex is None:
            raise PlyParseError("no 'vertex' element in header")
        if elements[0][0] != "vertex" and elements[0][1] > 0:
            raise PlyParseError(f"element {elements[0][0]!r} precedes 'vertex'; unsupported layout")
        _, count, props = vertex
        if count == 0:
            raise PlyParseError("vertex element declares zero vertices")
        if any(t == "list" for _, t, _ in props):
            raise PlyParseError("list properties on the vertex element are unsupported")
        names = [p[0] for p in props]
        for axis in ("x", "y", "z"):
            if axis not in names:
                raise PlyParseError(f"vertex element is missing the {axis!r} property")
        has_color = all(c in names for c in ("red", "green", "blue"))
        if not has_color and not synthetic_colors:
            raise PlyParseError(
                "vertex element has no red/green/blue properties; "
                "pass synthetic_colors=True to assign neutral gray")

        if fmt == "binary_little_endian":
            dt = np.dtype([(n, "<" + t) for n, t, _ in props])
            raw = fh.read(dt.itemsize * count)
            if len(raw) != dt.itemsize * count:
                raise PlyParseError(
                    f"binary body truncated: expected {dt.itemsize * count} bytes, got {len(raw)}")
            rec = np.frombuffer(raw, dtype=dt, count=count)
        else:
            rows = []
            for i in range(count):
                line = fh.readline()
                if not line:
                    raise PlyParseError(
                        f"line {header_lines + i + 1}: ascii body truncated at vertex {i}")
                cells = line.split()
                if len(cells) < len(props):
                    raise PlyParseError(
                        f"line {header_lines + i + 1}: expected {len(props)} values, got {len(cells)}")
                rows.append([float(c) for c in cells[: len(props)]])
            arr = np.asarray(rows, dtype=np.float64)
            rec = {n: arr[:, j].astype("<" + t) for j, (n, t, _) in enumerate(props)}

        positions = np.stack(
            [np.asarray(rec["x"], dtype=np.float64),
             np.asarray(rec["y"], dtype=np.float64),
             np.asarray(rec["z"], dtype=np.float64)], axis=1)
        if has_color:
            chans = []
            for c in ("red", "green", "blue"):
                col = np.asarray(rec[c], dtype=np.float64)
                if np.dtype(dict((n, t) for n, t, _ in props)[c]).kind == "f":
                    chans.append(np.clip(col, 0.0, 1.0))
                else:
                    chans.append(col / 255.0)
            features = np.stack(chans, axis=1)
        else:
            features = np.full((count, 3), 0.5)
    return PointCloud(positions, features)


def save_ply(cloud: PointCloud, path, binary: bool = False) -> None:
    """Write float32 x,y,z + uchar red,green,blue, ascii or binary LE."""
    path = Path(path)
    pos = cloud.positions.astype("<f4")
    col = np.clip(np.round(cloud.features * 255.0), 0, 255).astype("u1")
    if col.shape[1] != 3:
        raise ValueError(f"PLY writer expects 3 color channels, got {col.shape[1]}")
    header = [
        "ply",
        f"format {'binary_little_endian' if binary else 'ascii'} 1.0",
        f"element vertex {len(cloud)}",
        "property float x", "property float y", "property float z",
        "property uchar red", "property uchar green", "property uchar blue",
        "end_header",
    ]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            rec = np.empty(len(cloud), dtype=np.dtype(
                [("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
                 ("red", "u1"), ("green", "u1"), ("blue", "u1")]))
            for j, n in enumerate(("x", "y", "z")):
                rec[n] = pos[:, j]
            for j, n in enumerate(("red", "green", "blue")):
                rec[n] = col[:, j]
            fh.write(rec.tobytes())
        else:
            lines = [
                f"{p[0]} {p[1]} {p[2]} {c[0]} {c[1]} {c[2]}"
                for p, c in zip(pos, col)
            ]
            fh.write(("\n".join(lines) + "\n").encode("ascii"))


# ---------------------------------------------------------------------------
# pose / intrinsics files
# ---------------------------------------------------------------------------

def save_poses(path, poses) -> None:
    """One camera per line: 12 whitespace-separated row-major 3x4 floats."""
    with open(path, "w") as fh:
        for p in poses:
            fh.write(" ".join(repr(float(v)) for v in p.matrix.ravel()) + "\n")


def load_poses(path) -> list[CameraPose]:
    poses = []
    for i, line in enumerate(Path(path).read_text().splitlines()):
        if not line.strip():
            continue
        vals = [float(v) for v in line.split()]
        if len(vals) != 12:
            raise ValueError(f"pose line {i + 1}: expected 12 floats, got {len(vals)}")
        poses.append(CameraPose(np.asarray(vals).reshape(3, 4)))
    if not poses:
        raise ValueError(f"no poses found in {path}")
    return poses


def save_intrinsics(path, k: CameraIntrinsics) -> None:
    Path(path).write_text(
        f"{repr(float(k.fx))} {repr(float(k.fy))} {repr(float(k.cx))} "
        f"{repr(float(k.cy))} {k.width} {k.height}\n")


def load_intrinsics(path) -> CameraIntrinsics:
    vals = Path(path).read_text().split()
    if len(vals) != 6:
        raise ValueError(f"intrinsics file must hold 'fx fy cx cy width height', got {len(vals)} values")
    return CameraIntrinsics(float(vals[0]), float(vals[1]), float(vals[2]),
                            float(vals[3]), int(vals[4]), int(vals[5]))


# ---------------------------------------------------------------------------
# synthetic scenes
# ---------------------------------------------------------------------------

def _checker(u, v, cell):
    return ((np.floor(u / cell) + np.floor(v / cell)) % 2.0)


def _face_points(rng, origin, e1, e2, n):
    """Uniform samples on the rectangle origin + a*e1 + b*e2 with face coords."""
    a = rng.random(n)
    b = rng.random(n)
    pts = (np.asarray(origin)[None, :]
           + a[:, None] * np.asarray(e1)[None, :]
           + b[:, None] * np.asarray(e2)[None, :])
    return pts, a * np.linalg.norm(e1), b * np.linalg.norm(e2)


_BOX_FACES = [
    # (origin, edge1, edge2): floor, ceiling, four walls of a 4 x 3 x 4 room
    ((0, 0, 0), (4, 0, 0), (0, 0, 4)),
    ((0, 3, 0), (4, 0, 0), (0, 0, 4)),
    ((0, 0, 0), (4, 0, 0), (0, 3, 0)),
    ((0, 0, 4), (4, 0, 0), (0, 3, 0)),
    ((0, 0, 0), (0, 0, 4), (0, 3, 0)),
    ((4, 0, 0), (0, 0, 4), (0, 3, 0)),
]


def _sample_box_like(rng, n, palette, fine_stripes=True):
    areas = np.array([np.linalg.norm(np.cross(e1, e2)) for _, e1, e2 in _BOX_FACES], dtype=np.float64)
    counts = rng.multinomial(n, areas / areas.sum())
    pts_all, col_all = [], []
    for face, ((origin, e1, e2), cnt) in enumerate(zip(_BOX_FACES, counts)):
        if cnt == 0:
            continue
        pts, u, v = _face_points(rng, origin, e1, e2, cnt)
        base = palette[face]
        check = _checker(u, v, 0.5)
        col = base * (0.45 + 0.40 * check[:, None])
        if fine_stripes:
            stripe = (np.floor(u / 0.12) % 2.0)
            col = col + 0.12 * stripe[:, None]
        col = col + 0.08 * (u / 4.0)[:, None]
        pts_all.append(pts)
        col_all.append(np.clip(col, 0.0, 1.0))
    return np.concatenate(pts_all), np.concatenate(col_all)


def _sample_sphere_field(rng, n, palette):
    # 12 hovering spheres over a floor plane; high-contrast latitude bands.
    centers = rng.uniform([0.6, 0.6, 0.6], [3.4, 2.4, 3.4], size=(12, 3))
    radii = rng.uniform(0.25, 0.55, size=12)
    n_floor = n // 4
    floor_pts, u, v = _face_points(rng, (0, 0, 0), (4, 0, 0), (0, 0, 4), n_floor)
    floor_col = np.repeat(np.array([[0.25, 0.25, 0.28]]), n_floor, axis=0)
    floor_col = floor_col + 0.35 * _checker(u, v, 1.0)[:, None]
    n_sph = n - n_floor
    area = radii ** 2
    counts = rng.multinomial(n_sph, area / area.sum())
    pts_all, col_all = [floor_pts], [np.clip(floor_col, 0, 1)]
    for i, cnt in enumerate(counts):
        if cnt == 0:
            continue
        d = rng.normal(size=(cnt, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        pts = centers[i] + radii[i] * d
        band = (np.floor((d[:, 1] + 1.0) / 0.25) % 2.0)
        col = palette[i % len(palette)] * (0.35 + 0.55 * band[:, None])
        pts_all.append(pts)
        col_all.append(np.clip(col, 0, 1))
    return np.concatenate(pts_all), np.concatenate(col_all)


def _default_views(width: int, height: int) -> list[CameraView]:
    k = CameraIntrinsics(fx=0.8 * width, fy=0.8 * width, cx=width / 2.0, cy=height / 2.0,
                         width=width, height=height)
    eye = (2.0, 1.6, 2.0)
    targets = [(0.6, 1.2, 0.6), (3.4, 1.2, 0.6), (3.4, 1.9, 3.4), (0.6, 1.9, 3.4)]
    return [CameraView(k, CameraPose.look_at(eye, t)) for t in targets]


def make_synthetic_scene(name: str, num_points: int, seed: int,
                         width: int = 64, height: int = 64
                         ) -> tuple[PointCloud, list[CameraView]]:
    """Deterministic desk-scale scene: a point cloud plus interior cameras.

    Scenes: ``box_room`` (textured walls, floor, ceiling), ``checker_walls``
    (high-contrast checkerboard room), ``sphere_field`` (banded spheres over
    a checker floor). Identical (name, num_points, seed) always produces
    bitwise-identical output; the color texture is a pure function of the
    surface position and seed, so clouds of different densities sample the
    same underlying scene.
    """
    if name not in VALID_SCENES:
        raise ValueError(f"unknown scene {name!r}; valid scenes: {', '.join(VALID_SCENES)}")
    if num_points < 1:
        raise ValueError("num_points must be >= 1")
    rng = np.random.default_rng(seed)
    palette = 0.25 + 0.75 * rng.random((12, 3))  # drawn first: independent of num_points
    if name == "box_room":
        pts, col = _sample_box_like(rng, num_points, palette)
    elif name == "checker_walls":
        bw = np.array([[0.95, 0.95, 0.95]] * 6)
        pts, col = _sample_box_like(rng, num_points, bw, fine_stripes=False)
        col = np.round(col)  # hard black/white checker
    else:
        pts, col = _sample_sphere_field(rng, num_points, palette)
    return PointCloud(pts, col), _default_views(width, height)
