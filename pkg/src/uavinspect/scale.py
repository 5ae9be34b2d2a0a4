"""Metric scale of a monocular reconstruction from UAV flight logs.

Reconstructed camera centers are paired in time with GPS/barometer records,
converted to a local East-North-Up frame, and the scale is the median over
pose pairs of metric displacement divided by reconstructed displacement.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import AlgorithmError, InputError
from .geometry import Pose, check_track

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6371000.0

REQUIRED_COLUMNS = ("time_s", "latitude", "longitude", "altitude_m")
OPTIONAL_COLUMNS = ("gps_alt_m",)


@dataclass(frozen=True)
class FlightLogRecord:
    timestamp: float
    latitude: float
    longitude: float
    altitude: float
    gps_altitude: Optional[float] = None

    def __post_init__(self):
        if abs(self.latitude) > 90 or abs(self.longitude) > 180:
            raise InputError("scale_recovery.bad_record", "latitude/longitude out of range")


@dataclass(frozen=True)
class SyncedPair:
    pose: Pose
    metric_position: np.ndarray
    log_time: float


class FlightLog(list):
    """Time-ordered list of :class:`FlightLogRecord`; ``skipped`` counts rejected rows."""

    skipped: int = 0


def parse_flight_log(path) -> FlightLog:
    """Read a flight-log CSV into time-ordered records.

    Column names are matched case-insensitively; extra columns (IMU etc.) are
    ignored.  Rows with missing or non-numeric required fields are skipped.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError("scale_recovery.empty_log", "flight log is empty") from None
        cols = {h.strip().lower(): i for i, h in enumerate(header)}
        missing = [c for c in REQUIRED_COLUMNS if c not in cols]
        if missing:
            raise InputError("scale_recovery.missing_column", f"flight log lacks column(s): {', '.join(missing)}")
        gps_col = cols.get("gps_alt_m")
        records, skipped = [], 0
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(row[cols[c]]) for c in REQUIRED_COLUMNS]
                if not all(math.isfinite(v) for v in vals):
                    raise ValueError
                gps = None
                if gps_col is not None and gps_col < len(row) and row[gps_col].strip():
                    gps = float(row[gps_col])
                records.append(FlightLogRecord(*vals, gps_altitude=gps))
            except (ValueError, IndexError, InputError):
                skipped += 1
    if skipped:
        log.warning("flight log %s: skipped %d malformed row(s)", path, skipped)
    if not records:
        raise InputError("scale_recovery.empty_log", "flight log has zero valid rows")
    records.sort(key=lambda r: r.timestamp)
    ts = [r.timestamp for r in records]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise InputError("scale_recovery.bad_log", "flight-log timestamps must be strictly increasing")
    out = FlightLog(records)
    out.skipped = skipped
    return out


def write_flight_log(records: Sequence[FlightLogRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        has_gps = any(r.gps_altitude is not None for r in records)
        w.writerow(list(REQUIRED_COLUMNS) + (["gps_alt_m"] if has_gps else []))
        for r in records:
            row = [repr(r.timestamp), repr(r.latitude), repr(r.longitude), repr(r.altitude)]
            if has_gps:
                row.append("" if r.gps_altitude is None else repr(r.gps_altitude))
            w.writerow(row)


def quat_to_matrix(qw, qx, qy, qz) -> np.ndarray:
    q = np.array([qw, qx, qy, qz], dtype=np.float64)
    nq = np.linalg.norm(q)
    if nq == 0:
        raise InputError("scale_recovery.bad_pose", "zero quaternion")
    w, x, y, z = q / nq
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(r: np.ndarray) -> tuple[float, float, float, float]:
    r = np.asarray(r, dtype=np.float64)
    tr = np.trace(r)
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        q = (0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s)
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2
        q = ((r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s)
    elif r[1, 1] > r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2
        q = ((r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s)
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2
        q = ((r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s)
    return tuple(float(v) for v in q)


def load_pose_track(path) -> list[Pose]:
    """Pose track: one ``timestamp qw qx qy qz tx ty tz`` line per image (camera-to-world)."""
    poses = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 8:
            raise InputError("scale_recovery.bad_pose_track", f"line {lineno}: expected 8 fields")
        try:
            t, qw, qx, qy, qz, tx, ty, tz = (float(v) for v in parts)
        except ValueError:
            raise InputError("scale_recovery.bad_pose_track", f"line {lineno}: non-numeric field") from None
        poses.append(Pose(quat_to_matrix(qw, qx, qy, qz), (tx, ty, tz), t))
    if not poses:
        raise InputError("scale_recovery.bad_pose_track", "pose track is empty")
    check_track(poses)
    return poses


def save_pose_track(poses: Sequence[Pose], path) -> None:
    lines = []
    for p in poses:
        q = matrix_to_quat(p.rotation)
        vals = (p.timestamp, *q, *p.translation.tolist())
        lines.append(" ".join(repr(float(v)) for v in vals))
    Path(path).write_text("\n".join(lines) + "\n")


def geodetic_to_enu(record: FlightLogRecord, origin: FlightLogRecord, use_gps_altitude: bool = False) -> np.ndarray:
    """Spherical-earth small-area East-North-Up offset of ``record`` from ``origin`` in meters."""
    lat0 = math.radians(origin.latitude)
    e = math.radians(record.longitude - origin.longitude) * math.cos(lat0) * EARTH_RADIUS_M
    n = math.radians(record.latitude - origin.latitude) * EARTH_RADIUS_M
    if use_gps_altitude and record.gps_altitude is not None and origin.gps_altitude is not None:
        u = record.gps_altitude - origin.gps_altitude
    else:
        u = record.altitude - origin.altitude
    return np.array([e, n, u])


def enu_to_geodetic(enu, origin: FlightLogRecord) -> tuple[float, float, float]:
    """Inverse of :func:`geodetic_to_enu` (barometric altitude)."""
    e, n, u = (float(v) for v in enu)
    lat0 = math.radians(origin.latitude)
    lat = origin.latitude + math.degrees(n / EARTH_RADIUS_M)
    lon = origin.longitude + math.degrees(e / (EARTH_RADIUS_M * math.cos(lat0)))
    return lat, lon, origin.altitude + u


def sync_poses(
    poses: Sequence[Pose],
    log_records: Sequence[FlightLogRecord],
    offset: float = 0.0,
    tolerance: float = 0.5,
    use_gps_altitude: bool = False,
) -> list[SyncedPair]:
    """Pair each pose with the flight log at ``pose.timestamp + offset``.

    A pose is paired when the nearest log record lies within ``tolerance``
    seconds; its metric position is linearly interpolated between the
    bracketing records (or taken from the nearest one at the log's ends).
    """
    if not poses or not log_records:
        raise InputError("scale_recovery.empty_input", "poses and flight log must be non-empty")
    origin = log_records[0]
    lt = np.array([r.timestamp for r in log_records])
    enu = np.array([geodetic_to_enu(r, origin, use_gps_altitude) for r in log_records])
    pairs = []
    for pose in poses:
        t = pose.timestamp + offset
        k = int(np.searchsorted(lt, t))
        near = [j for j in (k - 1, k) if 0 <= j < len(lt)]
        j = min(near, key=lambda j: abs(lt[j] - t))
        if abs(lt[j] - t) > tolerance:
            continue
        if 0 < k < len(lt):
            w = (t - lt[k - 1]) / (lt[k] - lt[k - 1])
            pos = (1.0 - w) * enu[k - 1] + w * enu[k]
        else:
            pos = enu[j].copy()
        pairs.append(SyncedPair(pose, pos, float(t)))
    if not pairs:
        raise AlgorithmError("scale_recovery.no_overlap", "no temporal overlap between poses and flight log")
    return pairs


def estimate_time_offset(
    poses: Sequence[Pose],
    log_records: Sequence[FlightLogRecord],
    tolerance: float = 0.5,
    search: tuple[float, float] = (-30.0, 30.0),
    step: float = 0.1,
) -> float:
    """Offset in ``search`` (scanned at ``step``) that pairs the most poses.

    Ties go to the offset of smallest magnitude.
    """
    lt = np.array([r.timestamp for r in log_records])
    pt = np.array([p.timestamp for p in poses])
    n_steps = int(round((search[1] - search[0]) / step))
    offsets = search[0] + step * np.arange(n_steps + 1)
    best, best_count = 0.0, -1
    for off in sorted(offsets, key=lambda o: (abs(o), o)):
        t = pt + off
        k = np.clip(np.searchsorted(lt, t), 1, max(len(lt) - 1, 1))
        d = np.minimum(np.abs(lt[k - 1] - t), np.abs(lt[np.minimum(k, len(lt) - 1)] - t))
        count = int(np.sum(d <= tolerance))
        if count > best_count:
            best, best_count = float(off), count
    return round(best, 10)


def pairwise_scale_ratios(pairs: Sequence[SyncedPair], min_baseline: float = 2.0) -> np.ndarray:
    """Metric / reconstructed displacement for every pair with metric baseline >= ``min_baseline``."""
    if len(pairs) < 2:
        raise InputError("scale_recovery.too_few_pairs", "need at least 2 synced pairs")
    m = np.array([p.metric_position for p in pairs])
    r = np.array([p.pose.translation for p in pairs])
    i, j = np.triu_indices(len(pairs), k=1)
    dm = np.linalg.norm(m[i] - m[j], axis=1)
    dr = np.linalg.norm(r[i] - r[j], axis=1)
    keep = dm >= min_baseline
    if not keep.any():
        raise AlgorithmError("scale_recovery.short_baseline", "all baselines shorter than min_baseline")
    if np.any(dr[keep] == 0.0):
        raise AlgorithmError(
            "scale_recovery.zero_reconstructed_baseline",
            "reconstructed displacement is zero where the metric displacement is not",
        )
    return dm[keep] / dr[keep]


def estimate_scale(pairs: Sequence[SyncedPair], min_baseline: float = 2.0) -> float:
    """Median of pairwise metric-to-reconstructed displacement ratios."""
    return float(np.median(pairwise_scale_ratios(pairs, min_baseline)))
