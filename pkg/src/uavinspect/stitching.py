"""Affine mosaicking of constant-altitude nadir frames.

For each consecutive pair, corners detected in frame ``k-1`` are tracked
into frame ``k``; an affine transform mapping frame ``k`` into frame ``k-1``
is estimated with RANSAC and chained onto the previous absolute transform,
so every frame is expressed in frame 0's pixel coordinates.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage, signal

from .errors import AlgorithmError, DegenerateError, InputError
from .imaging import bilinear_sample
from .planes import RansacConfig
from .rng import make_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AffineTransform:
    """``(x, y) -> (a x + b y + tx, c x + d y + ty)`` stored as a 2x3 matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64).reshape(2, 3)
        if not np.all(np.isfinite(m)):
            raise InputError("stitching.bad_transform", "non-finite affine entries")
        if m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0] == 0.0:
            raise InputError("stitching.bad_transform", "affine transform is not invertible")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    @classmethod
    def translation(cls, tx: float, ty: float) -> "AffineTransform":
        return cls(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty]]))

    @classmethod
    def rotation(cls, degrees: float, center=(0.0, 0.0), scale: float = 1.0) -> "AffineTransform":
        t = math.radians(degrees)
        c, s = scale * math.cos(t), scale * math.sin(t)
        cx, cy = center
        return cls(np.array([[c, -s, cx - c * cx + s * cy], [s, c, cy - s * cx - c * cy]]))

    @classmethod
    def from_3x3(cls, h: np.ndarray) -> "AffineTransform":
        return cls(np.asarray(h)[:2, :])

    def as_3x3(self) -> np.ndarray:
        return np.vstack([self.matrix, [0.0, 0.0, 1.0]])

    @property
    def det(self) -> float:
        m = self.matrix
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.matrix[:, :2].T + self.matrix[:, 2]

    def inverse(self) -> "AffineTransform":
        a = self.matrix[:, :2]
        ai = np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / self.det
        return AffineTransform(np.hstack([ai, (-ai @ self.matrix[:, 2])[:, None]]))

    def to_list(self) -> list[float]:
        return [float(v) for v in self.matrix.ravel()]


def compose(outer: AffineTransform, inner: AffineTransform) -> AffineTransform:
    """Transform applying ``inner`` first, then ``outer``."""
    a_o, t_o = outer.matrix[:, :2], outer.matrix[:, 2]
    a_i, t_i = inner.matrix[:, :2], inner.matrix[:, 2]
    return AffineTransform(np.hstack([a_o @ a_i, (a_o @ t_i + t_o)[:, None]]))


@dataclass(frozen=True)
class FeatureMatch:
    source: tuple
    target: tuple
    score: float


@dataclass(frozen=True)
class FeatureMatches:
    """Columnar set of matches: ``source[i]`` corresponds to ``target[i]``."""

    source: np.ndarray
    target: np.ndarray
    score: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.source, dtype=np.float64).reshape(-1, 2)
        t = np.asarray(self.target, dtype=np.float64).reshape(-1, 2)
        sc = np.asarray(self.score, dtype=np.float64).reshape(-1)
        if not (len(s) == len(t) == len(sc)):
            raise InputError("stitching.bad_matches", "source, target and score lengths differ")
        object.__setattr__(self, "source", s)
        object.__setattr__(self, "target", t)
        object.__setattr__(self, "score", sc)

    def __len__(self) -> int:
        return len(self.source)

    def __getitem__(self, i: int) -> FeatureMatch:
        return FeatureMatch(tuple(self.source[i]), tuple(self.target[i]), float(self.score[i]))

    def swapped(self) -> "FeatureMatches":
        return FeatureMatches(self.target, self.source, self.score)


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------


def _to_float_gray(img) -> np.ndarray:
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 3:
        a = a[..., :3].mean(axis=2)
    if a.ndim != 2:
        raise InputError("stitching.bad_image", "expected a 2-D image")
    return a


def harris_response(img, sigma: float = 1.5, k: float = 0.04) -> np.ndarray:
    a = _to_float_gray(img)
    ix = ndimage.sobel(a, axis=1, mode="reflect") / 8.0
    iy = ndimage.sobel(a, axis=0, mode="reflect") / 8.0
    sxx = ndimage.gaussian_filter(ix * ix, sigma)
    syy = ndimage.gaussian_filter(iy * iy, sigma)
    sxy = ndimage.gaussian_filter(ix * iy, sigma)
    return sxx * syy - sxy * sxy - k * (sxx + syy) ** 2


def detect_corners(
    img,
    max_n: int = 400,
    min_spacing: float = 10.0,
    border: int = 8,
    rel_threshold: float = 0.01,
    min_count: int = 8,
) -> np.ndarray:
    """Harris local maxima as ``(N, 2)`` ``(x, y)`` pixel positions, strongest first.

    Candidates are accepted greedily so that all returned corners are at least
    ``min_spacing`` apart.
    """
    a = _to_float_gray(img)
    h, w = a.shape
    if h < 32 or w < 32:
        raise InputError("stitching.image_too_small", "image must be at least 32x32")
    r = harris_response(a)
    peak = ndimage.maximum_filter(r, size=3, mode="nearest")
    rmax = float(r.max())
    cand = (r == peak) & (r > max(rel_threshold * rmax, 1e-9))
    cand[:border, :] = False
    cand[h - border:, :] = False
    cand[:, :border] = False
    cand[:, w - border:] = False
    ys, xs = np.nonzero(cand)
    resp = r[ys, xs]
    order = np.lexsort((xs, ys, -resp))
    xs, ys = xs[order], ys[order]

    cell = max(min_spacing, 1.0)
    grid: dict[tuple[int, int], list[tuple[int, int]]] = {}
    out: list[tuple[int, int]] = []
    s2 = min_spacing * min_spacing
    for x, y in zip(xs.tolist(), ys.tolist()):
        gx, gy = int(x // cell), int(y // cell)
        ok = True
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for px, py in grid.get((gx + dx, gy + dy), ()):
                    if (px - x) ** 2 + (py - y) ** 2 < s2:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            out.append((x, y))
            grid.setdefault((gx, gy), []).append((x, y))
            if len(out) >= max_n:
                break
    if len(out) < min_count:
        raise AlgorithmError("stitching.insufficient_features",
                             f"insufficient features ({len(out)} corners)")
    return np.array(out, dtype=np.float64)


def _window_sums(x: np.ndarray, w: int) -> np.ndarray:
    """Sums over all ``w x w`` windows of a batch of 2-D arrays (valid mode)."""
    c = np.cumsum(np.cumsum(x, axis=1), axis=2)
    c = np.pad(c, ((0, 0), (1, 0), (1, 0)))
    return c[:, w:, w:] - c[:, :-w, w:] - c[:, w:, :-w] + c[:, :-w, :-w]


def _ncc_search(a: np.ndarray, b: np.ndarray, pts: np.ndarray, half: int, radius: int):
    """Exhaustive integer NCC search; returns ``(dx, dy, score)`` per point."""
    w = 2 * half + 1
    pad = radius + half
    bp = np.pad(b, pad, mode="constant")
    xs = pts[:, 0].astype(np.int64)
    ys = pts[:, 1].astype(np.int64)
    iy = np.arange(-half, half + 1)
    tpl = a[ys[:, None, None] + iy[None, :, None], xs[:, None, None] + iy[None, None, :]]
    tpl = tpl - tpl.mean(axis=(1, 2), keepdims=True)
    tnorm = np.sqrt((tpl * tpl).sum(axis=(1, 2)))
    S = 2 * pad + 1
    ir = np.arange(S)
    # region in padded coordinates: centered at (x + pad, y + pad)
    reg = bp[ys[:, None, None] + ir[None, :, None], xs[:, None, None] + ir[None, None, :]]
    num = signal.fftconvolve(reg, tpl[:, ::-1, ::-1], mode="valid", axes=(1, 2))
    n = float(w * w)
    s1 = _window_sums(reg, w)
    s2 = _window_sums(reg * reg, w)
    var = np.maximum(s2 - s1 * s1 / n, 0.0)
    denom = tnorm[:, None, None] * np.sqrt(var)
    with np.errstate(invalid="ignore", divide="ignore"):
        ncc = np.where(denom > 1e-9 * n, num / denom, -1.0)
    # windows that leave image B are not candidates
    h, wd = b.shape
    d = np.arange(-radius, radius + 1)
    okx = (xs[:, None] + d[None, :] - half >= 0) & (xs[:, None] + d[None, :] + half <= wd - 1)
    oky = (ys[:, None] + d[None, :] - half >= 0) & (ys[:, None] + d[None, :] + half <= h - 1)
    ncc = np.where(oky[:, :, None] & okx[:, None, :], ncc, -np.inf)
    flat = ncc.reshape(len(pts), -1)
    best = np.argmax(flat, axis=1)
    score = flat[np.arange(len(pts)), best]
    dy = best // (2 * radius + 1) - radius
    dx = best % (2 * radius + 1) - radius
    return dx.astype(np.float64), dy.astype(np.float64), np.clip(score, -1.0, 1.0)


def _lk_refine(a, b, pts, disp, half: int, iterations: int = 10):
    """Sub-pixel translational Lucas-Kanade refinement (inverse compositional)."""
    gy, gx = np.gradient(a)
    off = np.arange(-half, half + 1, dtype=np.float64)
    oy, ox = np.meshgrid(off, off, indexing="ij")
    px = pts[:, 0][:, None, None] + ox[None]
    py = pts[:, 1][:, None, None] + oy[None]
    tpl, _ = bilinear_sample(a, px, py)
    tx, _ = bilinear_sample(gx, px, py)
    ty, _ = bilinear_sample(gy, px, py)
    hxx = (tx * tx).sum(axis=(1, 2))
    hxy = (tx * ty).sum(axis=(1, 2))
    hyy = (ty * ty).sum(axis=(1, 2))
    det = hxx * hyy - hxy * hxy
    good = det > 1e-9 * np.maximum(hxx + hyy, 1e-300) ** 2
    d = disp.copy()
    start = disp.copy()
    for _ in range(iterations):
        warped, valid = bilinear_sample(b, px + d[:, 0, None, None], py + d[:, 1, None, None])
        inside = valid.all(axis=(1, 2))
        err = warped - tpl
        bx = (tx * err).sum(axis=(1, 2))
        by = (ty * err).sum(axis=(1, 2))
        with np.errstate(invalid="ignore", divide="ignore"):
            ux = (hyy * bx - hxy * by) / det
            uy = (hxx * by - hxy * bx) / det
        step = good & inside
        d[step, 0] -= ux[step]
        d[step, 1] -= uy[step]
    drift = np.abs(d - start).max(axis=1)
    d[(drift > 1.0) | ~good | ~np.all(np.isfinite(d), axis=1)] = start[(drift > 1.0) | ~good | ~np.all(np.isfinite(d), axis=1)]
    return d


def track_features(
    img_a,
    img_b,
    points,
    window: int = 15,
    search_radius: int = 48,
    min_ncc: float = 0.8,
    refine: bool = True,
    batch: int = 64,
) -> FeatureMatches:
    """Track ``points`` from ``img_a`` into ``img_b``.

    Each point's displacement is the integer offset within ``search_radius``
    maximizing the normalized cross-correlation of the ``window`` patch,
    optionally refined to sub-pixel precision by Lucas-Kanade iterations.
    Matches scoring below ``min_ncc`` are dropped.
    """
    a = _to_float_gray(img_a)
    b = _to_float_gray(img_b)
    if a.shape != b.shape:
        raise InputError("stitching.shape_mismatch", "images must have the same dimensions")
    if window % 2 != 1 or window < 3:
        raise InputError("stitching.bad_window", "window must be odd and >= 3")
    half = window // 2
    h, w = a.shape
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    pts = np.round(pts)
    keep = (pts[:, 0] >= half) & (pts[:, 0] <= w - 1 - half) & (pts[:, 1] >= half) & (pts[:, 1] <= h - 1 - half)
    pts = pts[keep]
    if len(pts) == 0:
        raise AlgorithmError("stitching.no_matches", "no trackable points")
    dxs, dys, scores = [], [], []
    for s in range(0, len(pts), batch):
        dx, dy, sc = _ncc_search(a, b, pts[s:s + batch], half, int(search_radius))
        dxs.append(dx)
        dys.append(dy)
        scores.append(sc)
    disp = np.stack([np.concatenate(dxs), np.concatenate(dys)], axis=1)
    score = np.concatenate(scores)
    ok = score >= min_ncc
    pts, disp, score = pts[ok], disp[ok], score[ok]
    if len(pts) == 0:
        raise AlgorithmError("stitching.no_matches", "zero matches survive the NCC threshold")
    if refine:
        disp = _lk_refine(a, b, pts, disp, half)
    tgt = pts + disp
    inb = (tgt[:, 0] >= 0) & (tgt[:, 0] <= w - 1) & (tgt[:, 1] >= 0) & (tgt[:, 1] <= h - 1)
    if not inb.any():
        raise AlgorithmError("stitching.no_matches", "zero matches inside the target image")
    return FeatureMatches(pts[inb], tgt[inb], score[inb])


# ---------------------------------------------------------------------------
# Affine RANSAC
# ---------------------------------------------------------------------------


def fit_affine_lstsq(src: np.ndarray, dst: np.ndarray) -> AffineTransform:
    a = np.hstack([src, np.ones((len(src), 1))])
    sol, _, rank, _ = np.linalg.lstsq(a, dst, rcond=None)
    if rank < 3:
        raise DegenerateError("stitching.degenerate", "degenerate sample")
    return AffineTransform(sol.T)


def estimate_affine_ransac(
    matches: FeatureMatches,
    cfg: RansacConfig,
    det_bound: Optional[float] = 0.5,
) -> tuple[AffineTransform, int]:
    """Affine map ``source -> target`` from 3-point minimal samples.

    The hypothesis with the most matches within ``cfg.inlier_threshold``
    pixels (default 2) wins, earliest on ties, and is refit by least squares
    on its inliers.  Hypotheses with ``|det - 1| > det_bound`` are rejected.
    Returns the refit transform and the winning hypothesis' inlier count.
    """
    n = len(matches)
    if n < 3:
        raise InputError("stitching.too_few_matches", "need at least 3 matches")
    src, dst = matches.source, matches.target
    thr = cfg.inlier_threshold if cfg.inlier_threshold is not None else 2.0
    rng = make_rng(cfg.rng_seed)
    picks = np.floor(rng.random((cfg.iterations, 3)) * n).astype(np.int64)
    ps = src[picks]
    qs = dst[picks]
    e1 = ps[:, 1] - ps[:, 0]
    e2 = ps[:, 2] - ps[:, 0]
    area2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    span = np.maximum(np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1), 1e-300)
    valid = np.abs(area2) > 1e-6 * span
    if not valid.any():
        raise DegenerateError("stitching.degenerate", "degenerate sample")
    k = np.nonzero(valid)[0]
    pmat = np.concatenate([ps[k], np.ones((len(k), 3, 1))], axis=2)  # rows [x y 1]
    m = np.linalg.solve(pmat, qs[k])  # (K, 3, 2): [x y 1] @ m = q
    mats = np.transpose(m, (0, 2, 1))  # (K, 2, 3)
    if det_bound is not None:
        dets = mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0]
        ok = np.abs(dets - 1.0) <= det_bound
        k, mats = k[ok], mats[ok]
        if len(k) == 0:
            raise AlgorithmError("stitching.bad_affine", "no hypothesis within the determinant bound")
    pred = np.einsum("kij,nj->kni", mats[:, :, :2], src) + mats[:, None, :, 2]
    res = np.linalg.norm(pred - dst[None], axis=2)
    counts = (res <= thr).sum(axis=1)
    best = int(np.argmax(counts))
    count = int(counts[best])
    floor = cfg.inlier_floor(n)
    if count < floor:
        raise AlgorithmError("stitching.too_few_inliers",
                             f"best affine has {count} inliers, below the required {floor}")
    inl = res[best] <= thr
    try:
        model = fit_affine_lstsq(src[inl], dst[inl])
    except DegenerateError:
        model = AffineTransform(mats[best])
    if det_bound is not None and abs(model.det - 1.0) > det_bound:
        raise AlgorithmError("stitching.bad_affine", f"refit determinant {model.det:.3f} out of bounds")
    return model, count


# ---------------------------------------------------------------------------
# Canvas
# ---------------------------------------------------------------------------


@dataclass
class Canvas:
    """Growing mosaic.  ``origin`` is the canvas pixel holding frame 0's ``(0, 0)``."""

    image: np.ndarray
    coverage: np.ndarray
    origin: tuple = (0, 0)
    transforms: list = field(default_factory=list)

    @classmethod
    def empty(cls, channels: int = 1) -> "Canvas":
        shape = (0, 0) if channels == 1 else (0, 0, channels)
        return cls(np.zeros(shape), np.zeros((0, 0), dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.coverage.shape

    def to_uint8(self) -> np.ndarray:
        return np.clip(np.floor(self.image + 0.5), 0, 255).astype(np.uint8)

    def canvas_transform(self, t: AffineTransform) -> AffineTransform:
        """Frame-0 transform ``t`` expressed in canvas pixel coordinates."""
        return compose(AffineTransform.translation(*self.origin), t)


def _footprint(t: AffineTransform, w: int, h: int) -> np.ndarray:
    return t.apply(np.array([[0, 0], [w - 1, 0], [0, h - 1], [w - 1, h - 1]], dtype=np.float64))


def warp_onto_canvas(
    canvas: Canvas,
    img,
    transform: AffineTransform,
    max_dim: int = 20000,
    blend: bool = False,
) -> Canvas:
    """Warp ``img`` (frame -> frame-0 coordinates) onto the canvas, growing it as needed.

    Pixels are filled by inverse mapping with bilinear sampling.  Overlaps are
    last-writer-wins unless ``blend`` averages them with existing content.
    """
    src = np.asarray(img, dtype=np.float64)
    h, w = src.shape[:2]
    corners = _footprint(transform, w, h)
    x0 = math.floor(corners[:, 0].min() + 1e-9)
    x1 = math.ceil(corners[:, 0].max() - 1e-9)
    y0 = math.floor(corners[:, 1].min() + 1e-9)
    y1 = math.ceil(corners[:, 1].max() - 1e-9)

    ox, oy = canvas.origin
    ch, cw = canvas.shape
    if cw == 0:
        bx0, by0, bx1, by1 = x0, y0, x1, y1
    else:
        bx0, by0 = min(x0, -ox), min(y0, -oy)
        bx1, by1 = max(x1, -ox + cw - 1), max(y1, -oy + ch - 1)
    nw, nh = bx1 - bx0 + 1, by1 - by0 + 1
    if nw > max_dim or nh > max_dim:
        raise AlgorithmError("stitching.canvas_too_large",
                             f"canvas {nw}x{nh} exceeds the maximum side {max_dim}")
    if (nw, nh) != (cw, ch) or (-bx0, -by0) != (ox, oy):
        shape = (nh, nw) + src.shape[2:]
        if canvas.image.ndim == 3 and src.ndim == 2:
            shape = (nh, nw, canvas.image.shape[2])
        image = np.zeros(shape)
        cov = np.zeros((nh, nw), dtype=bool)
        if cw:
            sx, sy = (-bx0) - ox, (-by0) - oy
            image[sy:sy + ch, sx:sx + cw] = canvas.image
            cov[sy:sy + ch, sx:sx + cw] = canvas.coverage
        canvas.image, canvas.coverage, canvas.origin = image, cov, (-bx0, -by0)
        ox, oy = canvas.origin

    inv = transform.inverse()
    gy, gx = np.mgrid[y0:y1 + 1, x0:x1 + 1].astype(np.float64)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    sp = inv.apply(pts)
    vals, valid = bilinear_sample(src, sp[:, 0], sp[:, 1])
    cy = (gy.ravel() + oy).astype(np.int64)[valid]
    cx = (gx.ravel() + ox).astype(np.int64)[valid]
    v = vals[valid]
    if blend:
        old = canvas.coverage[cy, cx]
        prev = canvas.image[cy, cx]
        mix = np.where(old[(...,) + (None,) * (v.ndim - 1)], 0.5 * (prev + v), v)
        canvas.image[cy, cx] = mix
    else:
        canvas.image[cy, cx] = v
    canvas.coverage[cy, cx] = True
    canvas.transforms.append(transform)
    return canvas


# ---------------------------------------------------------------------------
# Sequence stitching
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StitchConfig:
    max_corners: int = 250
    min_spacing: float = 10.0
    window: int = 15
    search_radius: int = 48
    min_ncc: float = 0.8
    ransac: RansacConfig = field(default_factory=lambda: RansacConfig(
        iterations=300, inlier_threshold=1.0, min_inliers=8, min_inlier_fraction=0.0, rng_seed=0))
    det_bound: float = 0.5
    max_canvas_dim: int = 20000
    blend: bool = False

    def to_dict(self) -> dict:
        r = self.ransac
        return {
            "detector": "harris", "max_corners": self.max_corners, "min_spacing": self.min_spacing,
            "tracker": "ncc+lk", "window": self.window, "search_radius": self.search_radius,
            "min_ncc": self.min_ncc, "det_bound": self.det_bound,
            "max_canvas_dim": self.max_canvas_dim, "blend": self.blend,
            "ransac": {"iterations": r.iterations, "inlier_threshold": r.inlier_threshold,
                       "min_inliers": r.min_inliers, "min_inlier_fraction": r.min_inlier_fraction,
                       "rng_seed": r.rng_seed},
        }


class PairFailure(AlgorithmError):
    def __init__(self, index: int, cause: Exception):
        msg = f"pair ({index - 1}, {index}) failed: {cause}"
        super().__init__("stitching.pair_failed", msg)
        self.pair_index = index
        self.cause = cause


@dataclass
class StitchResult:
    canvas: Canvas
    transforms: list[AffineTransform]
    pair_inliers: list[int]
    pair_matches: list[int]


def estimate_pair(img_prev, img_next, cfg: StitchConfig) -> tuple[AffineTransform, int, int]:
    """Affine mapping ``img_next`` pixel coordinates into ``img_prev``'s."""
    pts = detect_corners(img_prev, cfg.max_corners, cfg.min_spacing, border=cfg.window // 2 + 1)
    m = track_features(img_prev, img_next, pts, cfg.window, cfg.search_radius, cfg.min_ncc)
    t, inliers = estimate_affine_ransac(m.swapped(), cfg.ransac, cfg.det_bound)
    return t, inliers, len(m)


def stitch_sequence(images: Sequence, cfg: Optional[StitchConfig] = None) -> StitchResult:
    """Chain pairwise affines (frame 0 = identity) and composite all frames in order."""
    cfg = cfg or StitchConfig()
    if len(images) < 2:
        raise InputError("stitching.too_few_frames", "need at least 2 images")
    transforms = [AffineTransform.identity()]
    inliers, nmatch = [], []
    for k in range(1, len(images)):
        try:
            t, n_in, n_m = estimate_pair(images[k - 1], images[k], cfg)
        except (AlgorithmError, InputError) as exc:
            raise PairFailure(k, exc) from exc
        transforms.append(compose(transforms[-1], t))
        inliers.append(n_in)
        nmatch.append(n_m)
        log.info("pair %d-%d: %d/%d inliers", k - 1, k, n_in, n_m)
    first = np.asarray(images[0])
    canvas = Canvas.empty(1 if first.ndim == 2 else first.shape[2])
    for img, t in zip(images, transforms):
        warp_onto_canvas(canvas, img, t, cfg.max_canvas_dim, cfg.blend)
    return StitchResult(canvas, transforms, inliers, nmatch)


def write_transforms(transforms: Sequence[AffineTransform], path) -> None:
    lines = []
    for i, t in enumerate(transforms):
        a, b, tx, c, d, ty = t.to_list()
        lines.append(f"{i} {a!r} {b!r} {tx!r} {c!r} {d!r} {ty!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_transforms(path) -> list[AffineTransform]:
    out = []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 7:
            raise InputError("stitching.bad_transforms_file", f"expected 7 fields, got {len(parts)}")
        a, b, tx, c, d, ty = (float(v) for v in parts[1:])
        out.append(AffineTransform([[a, b, tx], [c, d, ty]]))
    return out


_NUM = re.compile(r"[-+]?\d+(?:\.\d+)?")


def frame_timestamp(path) -> float:
    """Timestamp in seconds parsed from the last number in a frame's file stem."""
    nums = _NUM.findall(Path(path).stem)
    if not nums:
        raise InputError("stitching.no_timestamp", f"no timestamp in filename {path}")
    return float(nums[-1])


def decimate_frames(paths: Sequence, rate_hz: float = 1.0) -> list:
    """Keep the first frame of every ``1 / rate_hz`` second interval (by filename timestamp)."""
    if not rate_hz > 0:
        raise InputError("stitching.bad_rate", "rate must be positive")
    stamped = sorted(((frame_timestamp(p), str(p), p) for p in paths))
    out, next_t = [], None
    for t, _, p in stamped:
        if next_t is None or t >= next_t - 1e-9:
            out.append(p)
            base = t if next_t is None else next_t
            next_t = base + 1.0 / rate_hz
            while next_t <= t + 1e-9:
                next_t += 1.0 / rate_hz
    return out
