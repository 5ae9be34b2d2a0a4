"""Distance between two adjacent buildings from a reconstructed point cloud.

Facade modes (in-between, frontal) compare the two facing walls: each
building is sliced along the separation axis, one plane per slab is fitted
with RANSAC and the best inward-facing plane is kept.  Roof mode fits the
roof planes (slices along the vertical axis) and measures the horizontal gap
between the facing roof edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from .errors import AlgorithmError, InputError
from .geometry import Plane, PointCloud, angle_between_deg, axis_index
from .planes import (
    DEFAULT_MAX_ANGLE_DEG,
    CandidatePlane,
    Cluster,
    RansacConfig,
    euclidean_clusters,
    extract_parallel_planes,
    median_nn_spacing,
    select_best_plane,
)

AXIS_NAMES = "XYZ"

ROOF_NOTE = (
    "roof mode: gap at each location is measured along the separation axis between "
    "the facing roof-edge coordinates of the two buildings' roof-plane inliers"
)


class Mode(str, Enum):
    ROOF = "roof"
    IN_BETWEEN = "in-between"
    FRONTAL = "frontal"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, Mode):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"inbetween": "in-between", "between": "in-between", "front": "frontal"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise InputError("distance_estimation.bad_mode", f"unknown mode {value!r}") from None

    @property
    def is_facade(self) -> bool:
        return self is not Mode.ROOF


@dataclass(frozen=True)
class ModeConfig:
    """Axis conventions and pipeline knobs for one flight mode.

    ``separation_axis`` is the axis across which the two buildings lie.  In
    roof mode ``slice_axis`` is the vertical axis along which roof layers are
    cut and gaps are sampled along the remaining axis; in facade modes slabs
    are cut along ``separation_axis`` and gaps are sampled along
    ``slice_axis``.

    ``cluster_radius=None`` uses three times the cloud's median nearest-
    neighbour spacing; ``bin_width=None`` uses 5% of the cluster extent
    clamped to [0.2, 2.0].

    ``roof_edge`` picks the roof-mode edge estimator: ``"quantile"`` takes the
    2nd percentile of the upper building's and the 98th percentile of the
    lower building's roof inliers along the separation axis; ``"strip-median"``
    takes the median over narrow strips of each strip's extreme coordinate.
    """

    separation_axis: str = "X"
    slice_axis: str = "Z"
    n_sample_locations: int = 4
    cluster_radius: Optional[float] = None
    min_cluster_size: int = 50
    bin_width: Optional[float] = None
    max_angle_deg: float = DEFAULT_MAX_ANGLE_DEG
    roof_edge: str = "quantile"
    roof_strip_width: Optional[float] = None

    def __post_init__(self):
        sep, sl = axis_index(self.separation_axis), axis_index(self.slice_axis)
        object.__setattr__(self, "separation_axis", AXIS_NAMES[sep])
        object.__setattr__(self, "slice_axis", AXIS_NAMES[sl])
        if sep == sl:
            raise InputError("distance_estimation.bad_config", "separation_axis must differ from slice_axis")
        if self.n_sample_locations < 1:
            raise InputError("distance_estimation.bad_config", "n_sample_locations must be >= 1")
        if self.roof_edge not in ("strip-median", "quantile"):
            raise InputError("distance_estimation.bad_config", f"unknown roof_edge {self.roof_edge!r}")

    @classmethod
    def for_mode(cls, mode, **overrides) -> "ModeConfig":
        mode = Mode.parse(mode)
        if mode is Mode.ROOF:
            base = cls(separation_axis="Y", slice_axis="Z")
        else:
            base = cls(separation_axis="X", slice_axis="Z")
        return replace(base, **overrides)

    def to_dict(self) -> dict:
        return {
            "separation_axis": self.separation_axis,
            "slice_axis": self.slice_axis,
            "n_sample_locations": self.n_sample_locations,
            "cluster_radius": self.cluster_radius,
            "min_cluster_size": self.min_cluster_size,
            "bin_width": self.bin_width,
            "max_angle_deg": self.max_angle_deg,
            "roof_edge": self.roof_edge,
            "roof_strip_width": self.roof_strip_width,
        }


@dataclass
class DistanceRow:
    label: str
    location: float
    unscaled: float
    metric: float

    def to_dict(self) -> dict:
        return {"label": self.label, "location": self.location,
                "unscaled": self.unscaled, "metric": self.metric}


@dataclass
class DistanceReport:
    mode: Mode
    scale: float
    rows: list[DistanceRow]
    planes: dict[str, CandidatePlane]
    plane_gap: float
    parameters: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def unscaled(self) -> np.ndarray:
        return np.array([r.unscaled for r in self.rows])

    @property
    def metric(self) -> np.ndarray:
        return np.array([r.metric for r in self.rows])

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "scale": self.scale,
            "plane_gap_unscaled": self.plane_gap,
            "plane_gap_metric": self.plane_gap * self.scale,
            "rows": [r.to_dict() for r in self.rows],
            "planes": {k: v.to_dict() for k, v in self.planes.items()},
            "parameters": self.parameters,
            "notes": list(self.notes),
        }


def _overlap(a: Cluster, b: Cluster, ax: int) -> tuple[float, float]:
    return max(float(a.bbox_min[ax]), float(b.bbox_min[ax])), min(float(a.bbox_max[ax]), float(b.bbox_max[ax]))


def sample_gap_locations(cluster_a: Cluster, cluster_b: Cluster, axis, n: int) -> list[float]:
    """Centers of ``n`` equal bins over the clusters' common extent along ``axis``."""
    if n < 1:
        raise InputError("distance_estimation.bad_config", "n must be >= 1")
    lo, hi = _overlap(cluster_a, cluster_b, axis_index(axis))
    if hi < lo:
        raise AlgorithmError("distance_estimation.no_overlap", "no facade overlap")
    w = (hi - lo) / n
    return [lo + (k + 0.5) * w for k in range(n)]


def _oriented(a: Plane, b: Plane) -> Plane:
    return b.flipped() if float(a.normal @ b.normal) < 0 else b


def plane_pair_gap(plane_a: Plane, plane_b: Plane, max_angle_deg: float = DEFAULT_MAX_ANGLE_DEG) -> float:
    """``|offset_a - offset_b|`` after turning ``plane_b`` into ``plane_a``'s hemisphere."""
    b = _oriented(plane_a, plane_b)
    ang = angle_between_deg(plane_a.normal, b.normal, unsigned=False)
    if ang > max_angle_deg:
        raise AlgorithmError(
            "distance_estimation.non_parallel",
            f"plane normals differ by {ang:.2f} deg (limit {max_angle_deg})",
        )
    return abs(plane_a.offset - b.offset)


def gap_at_point(plane_a: Plane, plane_b: Plane, p) -> float:
    """Separation of the two planes along their mean normal, through point ``p``."""
    b = _oriented(plane_a, plane_b)
    n = plane_a.normal + b.normal
    n = n / np.linalg.norm(n)
    p = np.asarray(p, dtype=np.float64)
    pa = p - n * ((plane_a.normal @ p + plane_a.offset) / (plane_a.normal @ n))
    pb = p - n * ((b.normal @ p + b.offset) / (b.normal @ n))
    return abs(float(n @ (pa - pb)))


def _faces(cloud: PointCloud, cand: CandidatePlane, own: np.ndarray, other: np.ndarray, ax: int) -> bool:
    m = cloud.points[cand.inliers].mean(axis=0)
    return (m[ax] - own[ax]) * (other[ax] - own[ax]) > 0


def _two_buildings(cloud: PointCloud, cfg: ModeConfig) -> tuple[Cluster, Cluster, float]:
    radius = cfg.cluster_radius
    if radius is None:
        radius = 3.0 * median_nn_spacing(cloud.points)
        if radius <= 0:
            raise InputError("distance_estimation.degenerate_cloud", "cloud has coincident points only")
    clusters = euclidean_clusters(cloud, radius, cfg.min_cluster_size)
    if len(clusters) < 2:
        raise AlgorithmError(
            "distance_estimation.too_few_clusters",
            f"fewer than 2 clusters (found {len(clusters)})",
        )
    a, b = clusters[0], clusters[1]
    sep = axis_index(cfg.separation_axis)
    ca = cloud.points[a.indices].mean(axis=0)
    cb = cloud.points[b.indices].mean(axis=0)
    if cb[sep] < ca[sep]:
        a, b = b, a
    return a, b, radius


def estimate_distances(
    cloud: PointCloud,
    mode,
    mode_cfg: Optional[ModeConfig] = None,
    ransac_cfg: Optional[RansacConfig] = None,
    scale: float = 1.0,
) -> DistanceReport:
    """Run clustering, plane extraction and gap sampling for one flight mode.

    ``building_1`` is the building with the lower centroid along the
    separation axis.  Distances are computed in cloud units and multiplied by
    ``scale`` for the metric column.
    """
    mode = Mode.parse(mode)
    cfg = mode_cfg if mode_cfg is not None else ModeConfig.for_mode(mode)
    rcfg = ransac_cfg if ransac_cfg is not None else RansacConfig()
    if not scale > 0 or not math.isfinite(scale):
        raise InputError("distance_estimation.bad_scale", "scale must be > 0")

    a, b, radius = _two_buildings(cloud, cfg)
    sep = axis_index(cfg.separation_axis)
    sl = axis_index(cfg.slice_axis)
    third = 3 - sep - sl
    ca = cloud.points[a.indices].mean(axis=0)
    cb = cloud.points[b.indices].mean(axis=0)

    params = {
        "mode_config": cfg.to_dict(),
        "ransac": {
            "iterations": rcfg.iterations,
            "inlier_threshold": rcfg.inlier_threshold,
            "min_inliers": rcfg.min_inliers,
            "min_inlier_fraction": rcfg.min_inlier_fraction,
            "rng_seed": rcfg.rng_seed,
        },
        "resolved_cluster_radius": radius,
        "cluster_sizes": [len(a), len(b)],
    }

    plane_axis = sep if mode.is_facade else sl
    picked = {}
    for name, cl, own, other in (("building_1", a, ca, cb), ("building_2", b, cb, ca)):
        cands = extract_parallel_planes(cloud, cl, plane_axis, cfg.bin_width, rcfg, cfg.max_angle_deg)
        if not cands:
            raise AlgorithmError("distance_estimation.no_plane", f"no plane passes selection for {name}")
        if mode.is_facade:
            facing = [c for c in cands if _faces(cloud, c, own, other, sep)]
            cands = facing or cands
        picked[name] = select_best_plane(cands)
    pa, pb = picked["building_1"].plane, picked["building_2"].plane
    plane_gap = plane_pair_gap(pa, pb, cfg.max_angle_deg)

    notes = []
    if mode.is_facade:
        locs = sample_gap_locations(a, b, sl, cfg.n_sample_locations)
        lo3, hi3 = _overlap(a, b, third)
        mid3 = 0.5 * (lo3 + hi3) if hi3 >= lo3 else 0.5 * (ca[third] + cb[third])
        unscaled = []
        for s in locs:
            p = np.empty(3)
            p[sep] = 0.5 * (ca[sep] + cb[sep])
            p[sl] = s
            p[third] = mid3
            unscaled.append(gap_at_point(pa, pb, p))
    else:
        locs = sample_gap_locations(a, b, third, cfg.n_sample_locations)
        unscaled = _roof_gaps(cloud, picked["building_1"], picked["building_2"], sep, third, locs, cfg)
        notes.append(ROOF_NOTE + f" ({cfg.roof_edge})")

    rows = [
        DistanceRow(f"L{k + 1}", float(s), float(u), float(u) * scale)
        for k, (s, u) in enumerate(zip(locs, unscaled))
    ]
    return DistanceReport(mode, float(scale), rows, picked, float(plane_gap), params, notes)


def _roof_gaps(cloud, low: CandidatePlane, high: CandidatePlane, sep: int, along: int,
               locs: list[float], cfg: ModeConfig) -> list[float]:
    lp = cloud.points[low.inliers]
    hp = cloud.points[high.inliers]
    half = 0.5 * ((locs[1] - locs[0]) if len(locs) > 1 else _span(lp, hp, along))
    strip = cfg.roof_strip_width
    if strip is None:
        strip = 2.0 * max(low.threshold, high.threshold)
    gaps = []
    for s in locs:
        lb = lp[np.abs(lp[:, along] - s) <= half]
        hb = hp[np.abs(hp[:, along] - s) <= half]
        if len(lb) == 0 or len(hb) == 0:
            raise AlgorithmError("distance_estimation.no_roof_points",
                                 f"no roof inliers near location {s:.3f}")
        if cfg.roof_edge == "quantile":
            edge_high = np.percentile(hb[:, sep], 2.0)
            edge_low = np.percentile(lb[:, sep], 98.0)
        else:
            edge_high = np.median(_strip_extremes(hb, along, sep, s - half, strip, np.min))
            edge_low = np.median(_strip_extremes(lb, along, sep, s - half, strip, np.max))
        gaps.append(float(edge_high - edge_low))
    return gaps


def _span(a: np.ndarray, b: np.ndarray, ax: int) -> float:
    lo = max(a[:, ax].min(), b[:, ax].min())
    hi = min(a[:, ax].max(), b[:, ax].max())
    return max(hi - lo, 0.0)


def _strip_extremes(pts: np.ndarray, along: int, sep: int, start: float, width: float, fn) -> np.ndarray:
    """Per-strip extreme of the separation coordinate (the facing roof edge)."""
    strips = np.floor((pts[:, along] - start) / width).astype(np.int64)
    order = np.argsort(strips, kind="stable")
    _, starts = np.unique(strips[order], return_index=True)
    vals = pts[order, sep]
    if fn is np.min:
        return np.minimum.reduceat(vals, starts)
    return np.maximum.reduceat(vals, starts)
