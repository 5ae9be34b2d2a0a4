"""Raster primitives: undistortion, histogram equalization, thresholding, masks.

Gray images are ``(H, W)`` uint8 arrays and binary masks ``(H, W)`` bool
arrays, both row-major.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import InputError


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics with Brown-Conrady radial (k1, k2) and tangential (p1, p2) terms."""

    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InputError("imaging.bad_intrinsics", "focal lengths must be positive")

    def distort_normalized(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        r2 = x * x + y * y
        radial = 1.0 + self.k1 * r2 + self.k2 * r2 * r2
        xd = x * radial + 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x)
        yd = y * radial + self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y
        return xd, yd

    def undistort_normalized(self, xd, yd, iterations: int = 20):
        """Invert :meth:`distort_normalized` by fixed-point iteration."""
        xd = np.asarray(xd, dtype=np.float64)
        yd = np.asarray(yd, dtype=np.float64)
        x, y = xd.copy(), yd.copy()
        for _ in range(iterations):
            r2 = x * x + y * y
            radial = 1.0 + self.k1 * r2 + self.k2 * r2 * r2
            dx = 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x)
            dy = self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y
            x = (xd - dx) / radial
            y = (yd - dy) / radial
        return x, y

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in ("fx", "fy", "cx", "cy", "k1", "k2", "p1", "p2")}


def _as_gray(img) -> np.ndarray:
    a = np.asarray(img)
    if a.ndim != 2:
        raise InputError("imaging.bad_image", "expected a single-channel (H, W) image")
    return a


def bilinear_sample(img: np.ndarray, sx: np.ndarray, sy: np.ndarray, eps: float = 1e-6):
    """Sample ``img`` at float coordinates; returns ``(values, valid)``.

    Coordinates within ``eps`` of the pixel grid are clamped onto it so that
    an identity mapping stays exact at the borders.
    """
    h, w = img.shape[:2]
    valid = (sx >= -eps) & (sx <= w - 1 + eps) & (sy >= -eps) & (sy <= h - 1 + eps)
    x = np.clip(sx, 0.0, w - 1.0)
    y = np.clip(sy, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.int64), max(w - 2, 0))
    y0 = np.minimum(np.floor(y).astype(np.int64), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    src = img.astype(np.float64)
    if src.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bot = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    return top * (1 - fy) + bot * fy, valid


def _to_uint8(v: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(v + 0.5), 0, 255).astype(np.uint8)


def undistort(img, K: CameraIntrinsics) -> np.ndarray:
    """Remove lens distortion: each output pixel samples the input at its distorted location."""
    src = np.asarray(img)
    h, w = src.shape[:2]
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    x = (u - K.cx) / K.fx
    y = (v - K.cy) / K.fy
    xd, yd = K.distort_normalized(x, y)
    vals, valid = bilinear_sample(src, xd * K.fx + K.cx, yd * K.fy + K.cy)
    if src.ndim == 3:
        vals[~valid] = 0
    else:
        vals = np.where(valid, vals, 0.0)
    return _to_uint8(vals) if src.dtype == np.uint8 else vals.astype(src.dtype)


def histogram_equalize(img) -> np.ndarray:
    """CDF remap ``round(255 * (cdf(v) - cdf_min) / (N - cdf_min))``."""
    a = _as_gray(img)
    if a.size == 0:
        raise InputError("imaging.empty_image", "empty image")
    a = a.astype(np.uint8)
    hist = np.bincount(a.ravel(), minlength=256)
    cdf = np.cumsum(hist)
    cdf_min = int(cdf[np.nonzero(hist)[0][0]])
    n = a.size
    if n == cdf_min:
        return a.copy()
    lut = np.floor(255.0 * (cdf - cdf_min) / (n - cdf_min) + 0.5)
    lut = np.clip(lut, 0, 255).astype(np.uint8)
    return lut[a]


def threshold(img, t: int = 128) -> np.ndarray:
    return _as_gray(img) >= t


_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def label_components(mask, connectivity: int = 8) -> tuple[np.ndarray, int]:
    if connectivity not in _STRUCTURES:
        raise InputError("imaging.bad_connectivity", "connectivity must be 4 or 8")
    return ndimage.label(np.asarray(mask, dtype=bool), structure=_STRUCTURES[connectivity])


def largest_component(mask, connectivity: int = 8) -> np.ndarray:
    """Keep only the largest connected true region (first in raster order on ties)."""
    m = np.asarray(mask, dtype=bool)
    labels, n = label_components(m, connectivity)
    if n == 0:
        return np.zeros_like(m)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return labels == int(np.argmax(sizes))


def mask_area_pixels(mask) -> int:
    return int(np.count_nonzero(mask))


# ---------------------------------------------------------------------------
# Raster I/O
# ---------------------------------------------------------------------------


def read_gray(path) -> np.ndarray:
    """Read a PGM/PBM/PNG raster as 8-bit gray (PBM maps to 0/255)."""
    try:
        with Image.open(path) as im:
            if im.mode == "1":
                return np.asarray(im, dtype=bool).astype(np.uint8) * 255
            if im.mode not in ("L", "P", "I", "I;16", "RGB", "RGBA", "LA"):
                raise InputError("imaging.bad_raster", f"unsupported raster mode {im.mode}")
            if im.mode in ("I", "I;16"):
                a = np.asarray(im, dtype=np.float64)
                return np.clip(a, 0, 255).astype(np.uint8)
            return np.asarray(im.convert("L"), dtype=np.uint8)
    except (OSError, SyntaxError, ValueError) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise InputError("imaging.bad_raster", f"cannot decode raster {path}: {exc}") from None


def read_mask(path, t: int = 128) -> np.ndarray:
    return threshold(read_gray(path), t)


def write_gray(img, path) -> None:
    a = np.asarray(img)
    if a.dtype == bool:
        a = a.astype(np.uint8) * 255
    Image.fromarray(a.astype(np.uint8)).save(Path(path))
