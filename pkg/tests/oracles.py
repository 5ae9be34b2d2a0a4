"""Independent reference implementations used to check the package.

These deliberately take different routes from the code under test
(brute force, textbook formulas, plain loops) so agreement is meaningful.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np


def union_find_clusters(points: np.ndarray, radius: float, min_size: int) -> list[set[int]]:
    """O(n^2) union-find over all pairs within ``radius``."""
    n = len(points)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
    ii, jj = np.nonzero(np.triu(d2 <= radius * radius, k=1))
    for i, j in zip(ii.tolist(), jj.tolist()):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    groups: dict[int, set[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), set()).add(i)
    return [g for g in groups.values() if len(g) >= min_size]


def eigh_plane(points: np.ndarray) -> tuple[np.ndarray, float]:
    """TLS plane through LAPACK's symmetric eigensolver, sign-normalized."""
    c = points.mean(axis=0)
    w, v = np.linalg.eigh(np.cov((points - c).T))
    n = v[:, 0]
    if n[np.argmax(np.abs(n))] < 0:
        n = -n
    return n, -float(n @ c)


def grid_plane_distance(normal, offset, p, half_extent=None, steps=401) -> float:
    """Distance from ``p`` to a plane by minimizing over a dense grid of plane points.

    The grid is centered on the point's foot so the minimum is attained near
    the middle; refinement zooms in three times.
    """
    n = np.asarray(normal, float)
    p = np.asarray(p, float)
    a = np.cross(n, [1.0, 0.0, 0.0] if abs(n[0]) < 0.9 else [0.0, 1.0, 0.0])
    a /= np.linalg.norm(a)
    b = np.cross(n, a)
    base = -offset * n  # a point on the plane
    center = base + a * ((p - base) @ a) + b * ((p - base) @ b) + a * 0.37 + b * -0.21
    span = half_extent or 2.0
    best = math.inf
    for _ in range(4):
        t = np.linspace(-span, span, steps)
        u, v = np.meshgrid(t, t)
        pts = center + u[..., None] * a + v[..., None] * b
        d = np.linalg.norm(pts - p, axis=2)
        k = np.unravel_index(np.argmin(d), d.shape)
        best = float(d[k])
        center = pts[k]
        span = span * 4.0 / steps
    return best


def haversine_m(lat1, lon1, lat2, lon2, radius=6371000.0) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * radius * math.asin(math.sqrt(h))


def flood_fill_largest(mask: np.ndarray, connectivity: int = 8) -> np.ndarray:
    """BFS labelling; ties keep the component found first in raster order."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    nbrs = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if connectivity == 8:
        nbrs += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    best: list = []
    for y in range(h):
        for x in range(w):
            if mask[y, x] and not seen[y, x]:
                comp = []
                q = deque([(y, x)])
                seen[y, x] = True
                while q:
                    cy, cx = q.popleft()
                    comp.append((cy, cx))
                    for dy, dx in nbrs:
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            q.append((ny, nx))
                if len(comp) > len(best):
                    best = comp
    out = np.zeros_like(mask, dtype=bool)
    for y, x in best:
        out[y, x] = True
    return out


def direct_ncc(a: np.ndarray, b: np.ndarray) -> float:
    a = a.astype(float) - a.mean()
    b = b.astype(float) - b.mean()
    return float((a * b).sum() / math.sqrt((a * a).sum() * (b * b).sum()))


def equalize_loop(img: np.ndarray) -> np.ndarray:
    """Histogram equalization written as plain loops over the 256 levels."""
    flat = img.ravel().tolist()
    n = len(flat)
    hist = [0] * 256
    for v in flat:
        hist[v] += 1
    cdf, run = [0] * 256, 0
    for i in range(256):
        run += hist[i]
        cdf[i] = run
    cmin = next(cdf[i] for i in range(256) if hist[i])
    if n == cmin:
        return img.copy()
    lut = [min(255, max(0, int(math.floor(255.0 * (cdf[i] - cmin) / (n - cmin) + 0.5)))) for i in range(256)]
    return np.array([lut[v] for v in flat], dtype=np.uint8).reshape(img.shape)


def fnv1a64_reference(data: bytes) -> int:
    h = 14695981039346656037
    for byte in data:
        h ^= byte
        h = (h * 1099511628211) % (1 << 64)
    return h
