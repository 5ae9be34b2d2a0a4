"""Core 3D types, point-cloud I/O and plane math.

Points are ``(N, 3)`` float64 arrays; a single point is a length-3 array.
A :class:`Plane` is the set ``{p : normal . p + offset = 0}`` with a unit normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateError, InputError

AXES = {"X": 0, "Y": 1, "Z": 2}


def axis_index(axis) -> int:
    if isinstance(axis, (int, np.integer)) and 0 <= int(axis) <= 2:
        return int(axis)
    try:
        return AXES[str(axis).upper()]
    except KeyError:
        raise InputError("core_geometry.bad_axis", f"unknown axis {axis!r}") from None


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Plane:
    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(n)) or not math.isfinite(self.offset):
            raise InputError("core_geometry.bad_plane", "plane parameters must be finite")
        if abs(float(np.linalg.norm(n)) - 1.0) > 1e-9:
            raise InputError("core_geometry.bad_plane", "plane normal must be unit length")
        object.__setattr__(self, "normal", _frozen(n.copy()))
        object.__setattr__(self, "offset", float(self.offset))

    def flipped(self) -> "Plane":
        return Plane(-self.normal, -self.offset)

    def to_dict(self) -> dict:
        return {"normal": [float(v) for v in self.normal], "offset": self.offset}


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InputError("core_geometry.bad_cloud", "points must have shape (N, 3)")
        if not np.all(np.isfinite(pts)):
            raise InputError("core_geometry.bad_cloud", "points must be finite")
        object.__setattr__(self, "points", _frozen(pts))
        if self.colors is not None:
            cols = np.array(self.colors, dtype=np.uint8)
            if cols.shape != pts.shape:
                raise InputError("core_geometry.bad_cloud", "colors must match points")
            object.__setattr__(self, "colors", _frozen(cols))

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class Pose:
    """Camera-to-world pose; ``translation`` is the camera center."""

    rotation: np.ndarray
    translation: np.ndarray
    timestamp: float

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        if np.max(np.abs(r @ r.T - np.eye(3))) > 1e-6:
            raise InputError("core_geometry.bad_pose", "rotation is not orthonormal")
        object.__setattr__(self, "rotation", _frozen(r))
        object.__setattr__(
            self, "translation", _frozen(np.array(self.translation, dtype=np.float64).reshape(3))
        )
        object.__setattr__(self, "timestamp", float(self.timestamp))


def check_track(poses: Sequence[Pose]) -> None:
    ts = [p.timestamp for p in poses]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise InputError("core_geometry.bad_track", "pose timestamps must be strictly increasing")


# ---------------------------------------------------------------------------
# Plane math
# ---------------------------------------------------------------------------


def sym3_eigenvalues(a: np.ndarray) -> tuple[float, float, float]:
    """Eigenvalues of a symmetric 3x3 matrix in ascending order (trigonometric closed form)."""
    a = np.asarray(a, dtype=np.float64)
    p1 = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
    diag = (a[0, 0], a[1, 1], a[2, 2])
    if p1 == 0.0:
        lo, mid, hi = sorted(float(d) for d in diag)
        return lo, mid, hi
    q = (diag[0] + diag[1] + diag[2]) / 3.0
    p2 = (diag[0] - q) ** 2 + (diag[1] - q) ** 2 + (diag[2] - q) ** 2 + 2.0 * p1
    p = math.sqrt(p2 / 6.0)
    b = (a - q * np.eye(3)) / p
    r = _det3(b) / 2.0
    r = min(1.0, max(-1.0, r))
    phi = math.acos(r) / 3.0
    hi = q + 2.0 * p * math.cos(phi)
    lo = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    mid = 3.0 * q - hi - lo
    return float(lo), float(mid), float(hi)


def _det3(m: np.ndarray) -> float:
    return float(
        m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
        - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
        + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
    )


def sym3_eigenvector(a: np.ndarray, eigenvalue: float) -> np.ndarray:
    """Unit eigenvector of symmetric ``a`` for a simple ``eigenvalue``.

    Uses the largest cross product between rows of ``a - eigenvalue*I``.
    """
    m = np.asarray(a, dtype=np.float64) - eigenvalue * np.eye(3)
    cands = np.array([np.cross(m[0], m[1]), np.cross(m[0], m[2]), np.cross(m[1], m[2])])
    norms = np.linalg.norm(cands, axis=1)
    k = int(np.argmax(norms))
    if norms[k] == 0.0:
        raise DegenerateError("core_geometry.degenerate", "eigenvalue is not simple")
    return cands[k] / norms[k]


def canonical_sign(normal: np.ndarray) -> np.ndarray:
    """Flip ``normal`` so its largest-magnitude component is positive."""
    k = int(np.argmax(np.abs(normal)))
    return -normal if normal[k] < 0 else normal


def fit_plane_tls(points) -> Plane:
    """Total-least-squares plane through ``points``.

    The normal is the covariance eigenvector with the smallest eigenvalue and
    the plane passes through the centroid.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 3:
        raise DegenerateError("core_geometry.too_few_points", "need at least 3 points")
    centroid = pts.mean(axis=0)
    d = pts - centroid
    cov = d.T @ d / len(pts)
    lo, mid, hi = sym3_eigenvalues(cov)
    if hi <= 0.0 or mid <= 1e-12 * hi:
        raise DegenerateError("core_geometry.degenerate", "degenerate: collinear")
    n = canonical_sign(sym3_eigenvector(cov, lo))
    return Plane(n, -float(n @ centroid))


def point_plane_distance(plane: Plane, p) -> float | np.ndarray:
    """Signed distance ``normal . p + offset``; vectorised over ``(N, 3)`` input."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 1:
        return float(plane.normal @ p + plane.offset)
    return p @ plane.normal + plane.offset


def angle_between_deg(a: np.ndarray, b: np.ndarray, *, unsigned: bool = True) -> float:
    c = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
    if unsigned:
        c = abs(c)
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


# ---------------------------------------------------------------------------
# Point-cloud I/O
# ---------------------------------------------------------------------------

_PLY_TYPES = {
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double",
    "int8", "uint8", "int16", "uint16", "int32", "uint32", "float32", "float64",
}


def load_point_cloud(path, format: Optional[str] = None) -> PointCloud:
    """Load an ASCII PLY or XYZ file; ``format`` defaults from the suffix."""
    path = Path(path)
    if format is None:
        format = "xyz" if path.suffix.lower() in (".xyz", ".txt") else "ascii-ply"
    text = path.read_bytes()
    if format in ("ply", "ascii-ply"):
        return _parse_ply(text)
    if format == "xyz":
        return _parse_xyz(text.decode("utf-8", errors="replace"))
    raise InputError("core_geometry.bad_format", f"unsupported point-cloud format {format!r}")


def _parse_xyz(text: str) -> PointCloud:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3:
            raise InputError("core_geometry.parse", f"line {lineno}: expected 3 coordinates")
        try:
            rows.append([float(v) for v in parts[:3]])
        except ValueError:
            raise InputError("core_geometry.parse", f"line {lineno}: non-numeric coordinate") from None
    if not rows:
        raise InputError("core_geometry.empty", "empty vertex list")
    return PointCloud(np.array(rows))


def _parse_ply(data: bytes) -> PointCloud:
    lines = data.decode("latin-1").split("\n")
    if not lines or lines[0].strip() != "ply":
        raise InputError("core_geometry.parse", "malformed header: missing 'ply' magic")
    n_vertex = None
    props: list[str] = []
    elements: list[tuple[str, int, list[str]]] = []
    fmt = None
    end = None
    for i, raw in enumerate(lines[1:], 1):
        tok = raw.strip().split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            fmt = tok[1] if len(tok) > 1 else None
        elif tok[0] == "element":
            if len(tok) != 3 or not tok[2].isdigit():
                raise InputError("core_geometry.parse", f"malformed header: {raw.strip()!r}")
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise InputError("core_geometry.parse", "malformed header: property before element")
            if tok[1] == "list":
                elements[-1][2].append("__list__")
            elif len(tok) == 3 and tok[1] in _PLY_TYPES:
                elements[-1][2].append(tok[2])
            else:
                raise InputError("core_geometry.parse", f"malformed header: {raw.strip()!r}")
        elif tok[0] == "end_header":
            end = i
            break
        else:
            raise InputError("core_geometry.parse", f"malformed header: {raw.strip()!r}")
    if end is None:
        raise InputError("core_geometry.parse", "malformed header: no end_header")
    if fmt != "ascii":
        raise InputError("core_geometry.unsupported", f"only ASCII PLY is supported (got {fmt!r})")
    body = [ln for ln in lines[end + 1:] if ln.strip()]
    pos = 0
    points = colors = None
    for name, count, eprops in elements:
        if name != "vertex":
            pos += count
            continue
        n_vertex = count
        props = eprops
        for req in ("x", "y", "z"):
            if req not in props:
                raise InputError("core_geometry.parse", f"malformed header: vertex lacks '{req}'")
        if count == 0:
            raise InputError("core_geometry.empty", "empty vertex list")
        recs = body[pos:pos + count]
        if len(recs) < count:
            raise InputError("core_geometry.truncated", "truncated vertex list")
        try:
            table = np.array([[float(v) for v in r.split()] for r in recs], dtype=np.float64)
        except ValueError:
            raise InputError("core_geometry.parse", "non-numeric coordinate") from None
        if table.ndim != 2 or table.shape[1] != len(props):
            raise InputError("core_geometry.parse", "vertex record has wrong field count")
        idx = [props.index(c) for c in ("x", "y", "z")]
        points = table[:, idx]
        if all(c in props for c in ("red", "green", "blue")):
            colors = table[:, [props.index(c) for c in ("red", "green", "blue")]].astype(np.uint8)
        pos += count
    if n_vertex is None:
        raise InputError("core_geometry.parse", "malformed header: no vertex element")
    return PointCloud(points, colors)


def save_point_cloud(cloud: PointCloud, path, format: Optional[str] = None) -> None:
    path = Path(path)
    if format is None:
        format = "xyz" if path.suffix.lower() in (".xyz", ".txt") else "ascii-ply"
    pts = cloud.points
    if format == "xyz":
        body = "".join(f"{x!r} {y!r} {z!r}\n" for x, y, z in pts.tolist())
        path.write_text(body)
        return
    header = ["ply", "format ascii 1.0", f"element vertex {len(pts)}",
              "property double x", "property double y", "property double z"]
    has_color = cloud.colors is not None
    if has_color:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    out = ["\n".join(header), "\n"]
    if has_color:
        for (x, y, z), (r, g, b) in zip(pts.tolist(), cloud.colors.tolist()):
            out.append(f"{x!r} {y!r} {z!r} {r} {g} {b}\n")
    else:
        out.extend(f"{x!r} {y!r} {z!r}\n" for x, y, z in pts.tolist())
    path.write_text("".join(out))
