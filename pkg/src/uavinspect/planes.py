"""Building isolation and piecewise RANSAC plane extraction.

A cluster is sliced into thin slabs along the normal axis of the plane of
interest; RANSAC runs independently per slab, producing a set of (nearly)
parallel candidate planes from which the best-supported one is selected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import AlgorithmError, DegenerateError, InputError
from .geometry import Plane, PointCloud, axis_index, canonical_sign, fit_plane_tls
from .rng import MASK64, make_rng

DEFAULT_MAX_ANGLE_DEG = 15.0


@dataclass(frozen=True)
class Cluster:
    indices: np.ndarray
    bbox_min: np.ndarray
    bbox_max: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)

    @classmethod
    def from_indices(cls, cloud: PointCloud, indices) -> "Cluster":
        idx = np.asarray(indices, dtype=np.int64)
        pts = cloud.points[idx]
        return cls(idx, pts.min(axis=0), pts.max(axis=0))


@dataclass(frozen=True)
class RansacConfig:
    """RANSAC settings shared by plane and affine estimation.

    ``inlier_threshold=None`` means "derive from the data" (twice the median
    nearest-neighbour spacing for point clouds).  The effective inlier floor is
    ``max(min_inliers, ceil(min_inlier_fraction * n))``.
    """

    iterations: int = 500
    inlier_threshold: Optional[float] = None
    min_inliers: int = 50
    min_inlier_fraction: float = 0.10
    rng_seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise InputError("plane_extraction.bad_config", "iterations must be >= 1")
        if self.inlier_threshold is not None and not self.inlier_threshold > 0:
            raise InputError("plane_extraction.bad_config", "inlier_threshold must be > 0")
        if self.min_inliers < 1:
            raise InputError("plane_extraction.bad_config", "min_inliers must be >= 1")
        if not 0.0 <= self.min_inlier_fraction <= 1.0:
            raise InputError("plane_extraction.bad_config", "min_inlier_fraction must be in [0, 1]")

    def inlier_floor(self, n: int) -> int:
        return max(self.min_inliers, math.ceil(self.min_inlier_fraction * n - 1e-9))

    def replace(self, **kw) -> "RansacConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class CandidatePlane:
    """Best RANSAC plane of one slab.

    ``plane`` is the total-least-squares refit on the inliers of the winning
    hypothesis ``raw_plane``; the inliers are those of the raw hypothesis.
    """

    plane: Plane
    inlier_count: int
    inliers: np.ndarray
    slab_index: int = 0
    raw_plane: Optional[Plane] = None
    threshold: float = 0.0

    def __post_init__(self):
        if self.inlier_count != len(self.inliers):
            raise InputError("plane_extraction.bad_candidate", "inlier_count must equal len(inliers)")

    def to_dict(self) -> dict:
        return {
            "plane": self.plane.to_dict(),
            "raw_plane": self.raw_plane.to_dict() if self.raw_plane is not None else None,
            "inlier_count": int(self.inlier_count),
            "slab_index": int(self.slab_index),
            "inlier_threshold": float(self.threshold),
        }


# ---------------------------------------------------------------------------
# Neighbour search and clustering
# ---------------------------------------------------------------------------

_HALF_STENCIL = [(0, 0, 0)] + [
    (dx, dy, dz)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
    if (dx, dy, dz) > (0, 0, 0)
]


def radius_pairs(points: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """All index pairs ``(i, j)``, ``i != j``, with ``|p_i - p_j| <= radius``.

    Uses a uniform voxel grid with cell edge ``radius``: every neighbour of a
    point lies in the 27 cells around its own, so visiting the own cell plus 13
    forward offsets enumerates each candidate pair exactly once.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n < 2:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    cells = np.floor((pts - pts.min(axis=0)) / radius).astype(np.int64)
    dims = cells.max(axis=0) + 3
    cells += 1  # keep neighbour coordinates non-negative
    keys = (cells[:, 0] * dims[1] + cells[:, 1]) * dims[2] + cells[:, 2]
    order = np.argsort(keys, kind="stable")
    skeys = keys[order]
    ukeys, starts, counts = np.unique(skeys, return_index=True, return_counts=True)
    ucells = cells[order[starts]]
    r2 = radius * radius

    out_i, out_j = [], []
    for off in _HALF_STENCIL:
        nb = ucells + np.asarray(off)
        nkeys = (nb[:, 0] * dims[1] + nb[:, 1]) * dims[2] + nb[:, 2]
        pos = np.searchsorted(ukeys, nkeys)
        pos = np.minimum(pos, len(ukeys) - 1)
        hit = ukeys[pos] == nkeys
        a_cells = np.nonzero(hit)[0]
        b_cells = pos[hit]
        ca = counts[a_cells]
        cb = counts[b_cells]
        tot = ca * cb
        if tot.sum() == 0:
            continue
        rep = np.repeat(np.arange(len(a_cells)), tot)
        local = np.arange(tot.sum()) - np.repeat(np.cumsum(tot) - tot, tot)
        ai = starts[a_cells][rep] + local // cb[rep]
        bj = starts[b_cells][rep] + local % cb[rep]
        if off == (0, 0, 0):
            keep = ai < bj
            ai, bj = ai[keep], bj[keep]
        i, j = order[ai], order[bj]
        d = pts[i] - pts[j]
        close = np.einsum("ij,ij->i", d, d) <= r2
        out_i.append(i[close])
        out_j.append(j[close])
    if not out_i:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(out_i), np.concatenate(out_j)


def euclidean_clusters(cloud: PointCloud, radius: float, min_size: int) -> list[Cluster]:
    """Connected components of the ``radius``-neighbourhood graph, largest first.

    Components smaller than ``min_size`` are dropped; ties in size are ordered
    by smallest member index.
    """
    if not radius > 0:
        raise InputError("plane_extraction.bad_radius", "radius must be > 0")
    n = len(cloud)
    if n == 0:
        raise InputError("plane_extraction.empty_cloud", "empty cloud")
    i, j = radius_pairs(cloud.points, radius)
    graph = coo_matrix((np.ones(len(i), dtype=np.int8), (i, j)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    order = np.argsort(labels, kind="stable")
    uniq, starts, counts = np.unique(labels[order], return_index=True, return_counts=True)
    groups = [order[s:s + c] for s, c in zip(starts, counts) if c >= min_size]
    groups.sort(key=lambda g: (-len(g), int(g[0])))
    return [Cluster.from_indices(cloud, g) for g in groups]


def median_nn_spacing(points: np.ndarray) -> float:
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        raise InputError("plane_extraction.too_few_points", "need at least 2 points for spacing")
    d, _ = cKDTree(pts).query(pts, k=2)
    return float(np.median(d[:, 1]))


def default_bin_width(cloud: PointCloud, cluster: Cluster, axis) -> float:
    """5% of the cluster's extent along ``axis``, clamped to [0.2, 2.0]."""
    a = axis_index(axis)
    extent = float(cluster.bbox_max[a] - cluster.bbox_min[a])
    return min(2.0, max(0.2, 0.05 * extent))


def slice_cluster(cloud: PointCloud, cluster: Cluster, axis, bin_width: float) -> list[np.ndarray]:
    """Partition the cluster into slabs ``floor((c - min c) / bin_width)`` along ``axis``.

    Slabs are returned in ascending order; the last one also holds points at
    its upper edge.
    """
    if not bin_width > 0:
        raise InputError("plane_extraction.bad_bin_width", "bin_width must be > 0")
    a = axis_index(axis)
    idx = np.asarray(cluster.indices, dtype=np.int64)
    if len(idx) == 0:
        return []
    coord = cloud.points[idx, a]
    rel = (coord - coord.min()) / bin_width
    # the last slab is closed so the maximum never lands alone in an extra
    # slab when the extent is a whole number of bin widths
    n_bins = max(1, math.ceil(float(rel.max()) - 1e-9))
    bins = np.minimum(np.floor(rel).astype(np.int64), n_bins - 1)
    order = np.argsort(bins, kind="stable")
    _, starts, counts = np.unique(bins[order], return_index=True, return_counts=True)
    return [idx[order[s:s + c]] for s, c in zip(starts, counts)]


# ---------------------------------------------------------------------------
# RANSAC
# ---------------------------------------------------------------------------

_CHUNK = 1 << 22  # distance-matrix elements evaluated per batch


def ransac_plane(
    cloud: PointCloud,
    indices,
    cfg: RansacConfig,
    axis_constraint: Optional[tuple] = None,
) -> CandidatePlane:
    """Best plane by inlier count over ``cfg.iterations`` 3-point samples.

    Samples are drawn up front from the seeded stream, one row per iteration,
    so a run with more iterations sees the same first hypotheses.  With
    ``axis_constraint=(axis, max_angle_deg)`` hypotheses whose normal is
    further than ``max_angle_deg`` from the axis are rejected.  Ties between
    hypotheses go to the earliest iteration.
    """
    idx = np.asarray(indices, dtype=np.int64)
    n = len(idx)
    if n < 3:
        raise InputError("plane_extraction.insufficient_points", "insufficient points")
    pts = cloud.points[idx]
    thr = cfg.inlier_threshold
    if thr is None:
        thr = 2.0 * median_nn_spacing(pts)
        if thr <= 0:
            raise DegenerateError("plane_extraction.degenerate", "coincident points")

    rng = make_rng(cfg.rng_seed)
    picks = np.floor(rng.random((cfg.iterations, 3)) * n).astype(np.int64)
    p0, p1, p2 = pts[picks[:, 0]], pts[picks[:, 1]], pts[picks[:, 2]]
    normals = np.cross(p1 - p0, p2 - p0)
    norms = np.linalg.norm(normals, axis=1)
    scale = np.maximum(np.linalg.norm(p1 - p0, axis=1) * np.linalg.norm(p2 - p0, axis=1), 1e-300)
    valid = norms > 1e-9 * scale
    if not valid.any():
        raise DegenerateError("plane_extraction.degenerate", "all samples degenerate")
    normals[valid] /= norms[valid, None]
    if axis_constraint is not None:
        a = axis_index(axis_constraint[0])
        cos_lim = math.cos(math.radians(float(axis_constraint[1])))
        valid &= np.abs(normals[:, a]) >= cos_lim - 1e-12
        if not valid.any():
            raise AlgorithmError(
                "plane_extraction.no_plane", "no sample satisfies the axis constraint"
            )
    offsets = -np.einsum("ij,ij->i", normals, p0)

    hyp = np.nonzero(valid)[0]
    counts = np.zeros(cfg.iterations, dtype=np.int64)
    step = max(1, _CHUNK // max(n, 1))
    for s in range(0, len(hyp), step):
        h = hyp[s:s + step]
        dist = np.abs(pts @ normals[h].T + offsets[h])
        counts[h] = (dist <= thr).sum(axis=0)
    best = int(np.argmax(np.where(valid, counts, -1)))
    count = int(counts[best])
    floor = cfg.inlier_floor(n)
    if count < floor:
        raise AlgorithmError(
            "plane_extraction.no_plane",
            f"best hypothesis has {count} inliers, below the required {floor}",
        )
    raw_n = canonical_sign(normals[best])
    sign = 1.0 if np.array_equal(raw_n, normals[best]) else -1.0
    raw = Plane(raw_n, sign * offsets[best])
    mask = np.abs(pts @ normals[best] + offsets[best]) <= thr
    inliers = idx[mask]
    try:
        refit = fit_plane_tls(pts[mask])
    except DegenerateError:
        refit = raw
    return CandidatePlane(refit, count, inliers, 0, raw, float(thr))


def extract_parallel_planes(
    cloud: PointCloud,
    cluster: Cluster,
    axis,
    bin_width: Optional[float],
    cfg: RansacConfig,
    max_angle_deg: float = DEFAULT_MAX_ANGLE_DEG,
) -> list[CandidatePlane]:
    """Piecewise RANSAC: one constrained plane per slab along ``axis``.

    Slab ``k`` uses seed ``cfg.rng_seed ^ k``.  A shared inlier threshold is
    derived from the whole cluster when ``cfg.inlier_threshold`` is None.
    Slabs that cannot produce a plane are skipped, so the result may be empty.
    """
    if bin_width is None:
        bin_width = default_bin_width(cloud, cluster, axis)
    if cfg.inlier_threshold is None:
        cfg = cfg.replace(inlier_threshold=2.0 * median_nn_spacing(cloud.points[cluster.indices]))
    out = []
    for k, slab in enumerate(slice_cluster(cloud, cluster, axis, bin_width)):
        if len(slab) < 3:
            continue
        slab_cfg = cfg.replace(rng_seed=(cfg.rng_seed ^ k) & MASK64)
        try:
            cand = ransac_plane(cloud, slab, slab_cfg, (axis, max_angle_deg))
        except (AlgorithmError, InputError):
            continue
        out.append(CandidatePlane(cand.plane, cand.inlier_count, cand.inliers, k,
                                  cand.raw_plane, cand.threshold))
    return out


def select_best_plane(candidates: Sequence[CandidatePlane]) -> CandidatePlane:
    """Candidate with the most inliers; ties go to the lower slab index."""
    if not candidates:
        raise InputError("plane_extraction.no_candidates", "empty candidate list")
    return min(candidates, key=lambda c: (-c.inlier_count, c.slab_index))
