"""Deterministic synthetic fixtures with known ground truth.

Every generator is a pure function of its arguments and seed; randomness
comes from :func:`uavinspect.rng.make_rng` (Philox4x64 keyed by the seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import InputError
from .geometry import PointCloud, Pose, axis_index, save_point_cloud
from .rng import make_rng

# ---------------------------------------------------------------------------
# Building pairs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SceneSpec:
    """Two axis-aligned boxes facing each other across a gap.

    Building sizes are ``(length, depth, height)``: length runs along the
    remaining horizontal axis, depth along ``separation_axis``, height along
    ``vertical_axis``.  Building 1 occupies ``[-gap/2 - depth, -gap/2]`` on the
    separation axis and building 2 ``[gap/2, gap/2 + depth]``.
    """

    size_a: tuple = (30.0, 10.0, 15.0)
    size_b: tuple = (30.0, 10.0, 15.0)
    gap: float = 12.96
    density: float = 10.0
    noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    seed: int = 0
    separation_axis: str = "X"
    vertical_axis: str = "Z"

    def __post_init__(self):
        if not self.gap > 0:
            raise InputError("synthgen.bad_spec", "gap must be > 0")
        if not self.density > 0:
            raise InputError("synthgen.bad_spec", "density must be > 0")
        if not 0.0 <= self.outlier_fraction < 0.5:
            raise InputError("synthgen.bad_spec", "outlier_fraction must be in [0, 0.5)")
        if self.noise_sigma < 0:
            raise InputError("synthgen.bad_spec", "noise_sigma must be >= 0")
        if axis_index(self.separation_axis) == axis_index(self.vertical_axis):
            raise InputError("synthgen.bad_spec", "separation and vertical axes must differ")

    @property
    def axes(self) -> tuple[int, int, int]:
        """(length axis, separation axis, vertical axis) indices."""
        sep, up = axis_index(self.separation_axis), axis_index(self.vertical_axis)
        return 3 - sep - up, sep, up


def _box_bounds(spec: SceneSpec, which: int) -> tuple[np.ndarray, np.ndarray]:
    length_ax, sep, up = spec.axes
    length, depth, height = spec.size_a if which == 0 else spec.size_b
    lo, hi = np.zeros(3), np.zeros(3)
    lo[length_ax], hi[length_ax] = 0.0, length
    lo[up], hi[up] = 0.0, height
    if which == 0:
        lo[sep], hi[sep] = -spec.gap / 2 - depth, -spec.gap / 2
    else:
        lo[sep], hi[sep] = spec.gap / 2, spec.gap / 2 + depth
    return lo, hi


def _sample_box_faces(rng, lo, hi, density) -> tuple[np.ndarray, list[dict]]:
    pts, faces = [], []
    for ax in range(3):
        u, v = [a for a in range(3) if a != ax]
        area = (hi[u] - lo[u]) * (hi[v] - lo[v])
        for side, val in (("min", lo[ax]), ("max", hi[ax])):
            n = int(round(area * density))
            p = np.empty((n, 3))
            p[:, ax] = val
            p[:, u] = lo[u] + rng.random(n) * (hi[u] - lo[u])
            p[:, v] = lo[v] + rng.random(n) * (hi[v] - lo[v])
            pts.append(p)
            normal = [0.0, 0.0, 0.0]
            normal[ax] = 1.0
            faces.append({"axis": "XYZ"[ax], "side": side, "normal": normal, "offset": -float(val)})
    return np.concatenate(pts), faces


def gen_building_pair(spec: SceneSpec) -> tuple[PointCloud, dict]:
    """Sample both boxes' faces, add Gaussian noise and uniform outliers.

    Returns the cloud and a truth record with the gap, the face planes of
    both boxes, the facing planes, and per-point labels (0, 1, or -1 for
    outliers).
    """
    rng = make_rng(spec.seed)
    surface, labels, boxes = [], [], []
    for which in (0, 1):
        lo, hi = _box_bounds(spec, which)
        pts, faces = _sample_box_faces(rng, lo, hi, spec.density)
        surface.append(pts)
        labels.append(np.full(len(pts), which))
        boxes.append({"min": lo.tolist(), "max": hi.tolist(), "faces": faces})
    pts = np.concatenate(surface)
    lab = np.concatenate(labels)
    if spec.noise_sigma > 0:
        pts = pts + rng.normal(0.0, spec.noise_sigma, size=pts.shape)
    n_out = int(round(spec.outlier_fraction / (1.0 - spec.outlier_fraction) * len(pts)))
    if n_out:
        lo = np.minimum(boxes[0]["min"], boxes[1]["min"]) - 2.0
        hi = np.maximum(boxes[0]["max"], boxes[1]["max"]) + 2.0
        outl = lo + rng.random((n_out, 3)) * (hi - lo)
        pts = np.concatenate([pts, outl])
        lab = np.concatenate([lab, np.full(n_out, -1)])
    _, sep, _ = spec.axes
    facing = []
    for which, side in ((0, "max"), (1, "min")):
        face = next(f for f in boxes[which]["faces"] if f["axis"] == "XYZ"[sep] and f["side"] == side)
        facing.append({"normal": face["normal"], "offset": face["offset"]})
    truth = {
        "gap": float(spec.gap),
        "spec": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(spec).items()},
        "boxes": boxes,
        "facing_planes": facing,
        "n_points": int(len(pts)),
        "n_outliers": int(n_out),
        "labels": lab.astype(int).tolist(),
    }
    return PointCloud(pts), truth


# ---------------------------------------------------------------------------
# Roof image sequences
# ---------------------------------------------------------------------------


def gen_texture(seed: int, width: int, height: int) -> np.ndarray:
    """Band-limited random field in ``[10, 245]``: a sum of Gaussian-smoothed noise octaves."""
    rng = make_rng(seed)
    acc = np.zeros((height, width))
    for sigma, weight in ((1.2, 0.35), (3.0, 0.35), (8.0, 0.3)):
        layer = ndimage.gaussian_filter(rng.standard_normal((height, width)), sigma, mode="wrap")
        acc += weight * layer / (layer.std() + 1e-12)
    lo, hi = np.percentile(acc, [0.5, 99.5])
    return np.clip(10.0 + 235.0 * (acc - lo) / (hi - lo), 10.0, 245.0)


def _as_steps(steps, n_frames):
    from .stitching import AffineTransform

    if isinstance(steps, AffineTransform):
        return [steps] * (n_frames - 1)
    steps = list(steps)
    if len(steps) != n_frames - 1:
        raise InputError("synthgen.bad_steps", "need n_frames - 1 per-step transforms")
    return steps


def gen_roof_sequence(
    texture_seed: int,
    n_frames: int,
    steps,
    frame_size: tuple = (640, 480),
    texture_size: Optional[tuple] = None,
    margin: int = 4,
):
    """Frames cropped from a master texture under known affine motion.

    ``steps[k-1]`` maps frame ``k`` pixel coordinates into frame ``k-1``'s, so
    the true absolute transform of frame ``k`` (into frame 0) is the
    composition of steps ``1..k``.  Frame ``k`` samples the texture at
    ``base(truth_k(x, y))`` where ``base`` places frame 0 in the texture.
    Without ``texture_size`` the texture is sized to fit every crop.

    Returns ``(frames, truths, info)``; frames are uint8 ``(H, W)`` arrays.
    """
    from .imaging import bilinear_sample
    from .stitching import AffineTransform, compose

    if n_frames < 1:
        raise InputError("synthgen.bad_spec", "n_frames must be >= 1")
    w, h = frame_size
    step_list = _as_steps(steps, n_frames) if n_frames > 1 else []
    truths = [AffineTransform.identity()]
    for s in step_list:
        truths.append(compose(truths[-1], s))
    corners = np.array([[0, 0], [w - 1, 0], [0, h - 1], [w - 1, h - 1]], dtype=np.float64)
    allc = np.concatenate([t.apply(corners) for t in truths])
    lo = allc.min(axis=0)
    hi = allc.max(axis=0)
    if texture_size is None:
        base = AffineTransform.translation(margin - math.floor(lo[0]), margin - math.floor(lo[1]))
        tw = int(math.ceil(hi[0]) - math.floor(lo[0])) + 2 * margin + 1
        th = int(math.ceil(hi[1]) - math.floor(lo[1])) + 2 * margin + 1
    else:
        tw, th = texture_size
        base = AffineTransform.translation(margin, margin)
        shifted = base.apply(allc)
        if shifted.min() < 0 or np.any(shifted[:, 0] > tw - 1) or np.any(shifted[:, 1] > th - 1):
            raise InputError("synthgen.crop_escapes", "crop escapes texture bounds")
    tex = gen_texture(texture_seed, tw, th)
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    grid = np.stack([u.ravel(), v.ravel()], axis=1)
    frames = []
    for t in truths:
        p = compose(base, t).apply(grid)
        vals, _ = bilinear_sample(tex, p[:, 0], p[:, 1])
        frames.append(np.clip(np.floor(vals + 0.5), 0, 255).astype(np.uint8).reshape(h, w))
    info = {"texture_size": [tw, th], "base": base.to_list(), "texture_seed": int(texture_seed)}
    return frames, truths, info


# ---------------------------------------------------------------------------
# Flight logs
# ---------------------------------------------------------------------------


def lawnmower_trajectory(
    width: float = 80.0,
    length: float = 60.0,
    spacing: float = 20.0,
    altitude: float = 30.0,
    speed: float = 5.0,
    dt: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Constant-altitude back-and-forth survey path; returns ``(positions, timestamps)``."""
    legs = int(math.floor(length / spacing)) + 1
    way = []
    for i in range(legs):
        y = i * spacing
        xs = (0.0, width) if i % 2 == 0 else (width, 0.0)
        way += [(xs[0], y), (xs[1], y)]
    way = np.array(way)
    seg = np.linalg.norm(np.diff(way, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.arange(0.0, cum[-1] + 1e-9, speed * dt)
    x = np.interp(s, cum, way[:, 0])
    y = np.interp(s, cum, way[:, 1])
    pos = np.stack([x, y, np.full_like(x, altitude)], axis=1)
    return pos, np.arange(len(pos)) * dt


def gen_flight_fixture(
    trajectory,
    scale: float,
    timestamps,
    origin: tuple = (47.0, 8.0, 400.0),
    gps_noise: float = 0.0,
    baro_noise: float = 0.0,
    seed: int = 0,
    log_timestamps=None,
    frame_rotation: Optional[np.ndarray] = None,
    frame_translation=(0.0, 0.0, 0.0),
):
    """Pose track and flight log reproducing an ENU ``trajectory``.

    Poses are ``R @ (trajectory / scale) + t`` (an arbitrary reconstruction
    frame) at ``timestamps``.  The log samples the trajectory, linearly
    interpolated at ``log_timestamps`` (default: the pose timestamps), with
    Gaussian horizontal noise ``gps_noise`` and vertical noise ``baro_noise``,
    converted to geodetic coordinates about ``origin``.
    """
    from .scale import FlightLogRecord, enu_to_geodetic

    if not scale > 0:
        raise InputError("synthgen.bad_spec", "scale must be > 0")
    traj = np.asarray(trajectory, dtype=np.float64).reshape(-1, 3)
    ts = np.asarray(timestamps, dtype=np.float64)
    if len(ts) != len(traj):
        raise InputError("synthgen.bad_spec", "trajectory and timestamps lengths differ")
    rot = np.eye(3) if frame_rotation is None else np.asarray(frame_rotation, dtype=np.float64)
    recon = traj / scale @ rot.T + np.asarray(frame_translation, dtype=np.float64)
    poses = [Pose(rot, p, float(t)) for p, t in zip(recon, ts)]

    lts = ts if log_timestamps is None else np.asarray(log_timestamps, dtype=np.float64)
    if len(ts) > 1:
        enu = np.stack([np.interp(lts, ts, traj[:, i]) for i in range(3)], axis=1)
    else:
        enu = np.repeat(traj[:1], len(lts), axis=0)
    rng = make_rng(seed)
    noise = np.zeros_like(enu)
    noise[:, :2] = rng.normal(0.0, 1.0, size=(len(enu), 2)) * gps_noise
    noise[:, 2] = rng.normal(0.0, 1.0, size=len(enu)) * baro_noise
    # positions are expressed relative to the first trajectory sample so the
    # first noiseless record sits exactly on ``origin``
    anchor = FlightLogRecord(float(lts[0]), origin[0], origin[1], origin[2], origin[2])
    records = []
    for t, p in zip(lts, enu - traj[0] + noise):
        lat, lon, alt = enu_to_geodetic(p, anchor)
        records.append(FlightLogRecord(float(t), lat, lon, alt, alt))
    return poses, records


# ---------------------------------------------------------------------------
# Roof masks
# ---------------------------------------------------------------------------


def polygon_area(poly) -> float:
    p = np.asarray(poly, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def points_in_polygon(x: np.ndarray, y: np.ndarray, poly) -> np.ndarray:
    """Even-odd rule containment test, vectorized over query points."""
    p = np.asarray(poly, dtype=np.float64)
    inside = np.zeros(np.shape(x), dtype=bool)
    n = len(p)
    for i in range(n):
        x1, y1 = p[i]
        x2, y2 = p[(i + 1) % n]
        if y1 == y2:
            continue
        cross = (y1 > y) != (y2 > y)
        xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= cross & (x < xint)
    return inside


L_SHAPED_ROOF = ((0.0, 0.0), (24.0, 0.0), (24.0, 9.0), (14.0, 9.0), (14.0, 17.0), (0.0, 17.0))


def render_roof_image(
    polygon_m=L_SHAPED_ROOF,
    depth_m: float = 50.0,
    intrinsics=None,
    size: tuple = (960, 720),
    roof_level: float = 210.0,
    ground_level: float = 45.0,
    noise_sigma: float = 0.0,
    supersample: int = 3,
    seed: int = 0,
    distractor: bool = True,
):
    """Nadir gray image of a flat roof polygon (meters, centered in view) at ``depth_m``.

    Each pixel integrates ``supersample**2`` rays through the (optionally
    distorted) camera; a small disconnected blob stands in for a neighbouring
    structure that largest-component selection must discard.  Returns
    ``(image, truth)`` with the polygon's geometric area.
    """
    from .imaging import CameraIntrinsics

    w, h = size
    K = intrinsics or CameraIntrinsics(1000.0, 1000.0, (w - 1) / 2.0, (h - 1) / 2.0)
    poly = np.asarray(polygon_m, dtype=np.float64)
    poly = poly - (poly.min(axis=0) + poly.max(axis=0)) / 2.0
    s = int(supersample)
    sub = (np.arange(s) + 0.5) / s - 0.5
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    cover = np.zeros((h, w))
    for dy in sub:
        for dx in sub:
            xd = (u + dx - K.cx) / K.fx
            yd = (v + dy - K.cy) / K.fy
            xn, yn = K.undistort_normalized(xd, yd)
            cover += points_in_polygon(xn * depth_m, yn * depth_m, poly)
    cover /= s * s
    img = ground_level + (roof_level - ground_level) * cover
    if distractor:
        r = max(3.0, 0.02 * min(w, h))
        cx, cy = 0.06 * w, 0.08 * h
        img = np.where((u - cx) ** 2 + (v - cy) ** 2 <= r * r, roof_level, img)
    if noise_sigma > 0:
        img = img + make_rng(seed).normal(0.0, noise_sigma, size=img.shape)
    img = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    truth = {"area_m2": polygon_area(poly), "depth_m": float(depth_m), "polygon_m": poly.tolist(),
             "intrinsics": K.to_dict()}
    return img, truth


def gen_layout_masks(
    percent: float,
    size: tuple = (400, 300),
    seed: int = 0,
    roof_box: Optional[tuple] = None,
    outside_objects: int = 3,
):
    """Roof and object masks with exactly ``round(percent/100 * roof_px)`` object pixels on the roof.

    Objects are random rectangles inside the roof, trimmed in raster order
    to the exact target; a few extra rectangles straddle or lie outside the
    roof so that clipping matters.  Returns ``(roof_mask, object_mask, truth)``.
    """
    if not 0.0 <= percent <= 100.0:
        raise InputError("synthgen.bad_spec", "percent must be in [0, 100]")
    w, h = size
    rng = make_rng(seed)
    x0, y0, x1, y1 = roof_box or (w // 8, h // 8, w - w // 8, h - h // 8)
    roof = np.zeros((h, w), dtype=bool)
    roof[y0:y1, x0:x1] = True
    n_roof = int(roof.sum())
    target = int(round(percent / 100.0 * n_roof))
    obj = np.zeros((h, w), dtype=bool)
    if target == n_roof:
        obj |= roof
    else:
        rw, rh = x1 - x0, y1 - y0
        while int(obj.sum()) < target:
            bw = int(rng.integers(max(2, rw // 20), max(3, rw // 5)))
            bh = int(rng.integers(max(2, rh // 20), max(3, rh // 5)))
            bx = int(rng.integers(x0, x1 - bw + 1))
            by = int(rng.integers(y0, y1 - bh + 1))
            obj[by:by + bh, bx:bx + bw] = True
        excess = int(obj.sum()) - target
        if excess:
            idx = np.flatnonzero(obj.ravel())[::-1][:excess]
            obj.ravel()[idx] = False
    for _ in range(outside_objects):
        bx = int(rng.integers(0, max(1, x0 - 4)))
        by = int(rng.integers(0, h - 6))
        obj[by:by + 5, bx:bx + 4] = True
    truth = {"percent": float(percent), "roof_pixels": n_roof,
             "object_pixels_on_roof": int((obj & roof).sum()),
             "exact_percent": 100.0 * int((obj & roof).sum()) / n_roof}
    return roof, obj, truth


# ---------------------------------------------------------------------------
# Fixture writers
# ---------------------------------------------------------------------------


def _write_truth(directory: Path, truth: dict) -> None:
    (directory / "truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")


def write_building_fixture(directory, spec: SceneSpec, scale: float = 1.0, flight: bool = True) -> dict:
    """``cloud.ply`` (reconstruction units = meters / scale) plus optional flight log and poses."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    cloud, truth = gen_building_pair(spec)
    save_point_cloud(PointCloud(cloud.points / scale), d / "cloud.ply")
    truth = {k: v for k, v in truth.items() if k != "labels"}
    truth["scale"] = float(scale)
    if flight:
        traj, ts = lawnmower_trajectory()
        poses, records = gen_flight_fixture(traj, scale, ts, seed=spec.seed)
        from .scale import save_pose_track, write_flight_log

        save_pose_track(poses, d / "poses.txt")
        write_flight_log(records, d / "flight_log.csv")
    _write_truth(d, truth)
    return truth


def write_sequence_fixture(directory, texture_seed: int, n_frames: int, steps, frame_size=(640, 480)) -> dict:
    from .imaging import write_gray
    from .stitching import write_transforms

    d = Path(directory)
    (d / "frames").mkdir(parents=True, exist_ok=True)
    frames, truths, info = gen_roof_sequence(texture_seed, n_frames, steps, frame_size)
    for k, f in enumerate(frames):
        write_gray(f, d / "frames" / f"frame_{k:04d}.pgm")
    write_transforms(truths, d / "truth_transforms.txt")
    truth = {"n_frames": n_frames, "frame_size": list(frame_size),
             "transforms": [t.to_list() for t in truths], **info}
    _write_truth(d, truth)
    return truth


def write_roof_fixture(directory, depth_m: float = 50.0, **kw) -> dict:
    from .imaging import write_gray

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    img, truth = render_roof_image(depth_m=depth_m, **kw)
    write_gray(img, d / "roof.pgm")
    _write_truth(d, truth)
    return truth


def write_layout_fixture(directory, percent: float, size=(400, 300), seed: int = 0) -> dict:
    from .imaging import write_gray

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    roof, obj, truth = gen_layout_masks(percent, size, seed)
    canvas = np.where(roof, 180, 60).astype(np.uint8)
    canvas[obj] = 240
    write_gray(canvas, d / "canvas.pgm")
    write_gray(roof, d / "roof_mask.pgm")
    write_gray(obj, d / "object_mask.pgm")
    _write_truth(d, truth)
    return truth
