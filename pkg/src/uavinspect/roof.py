"""Roof plan area from a segmentation mask, and rooftop occupancy.

Area follows the pinhole ground-sampling relation: one pixel covers
``(depth / focal)`` meters on a side at the roof's distance, so
``area = C * (D / f)**2`` where ``C`` is the roof's pixel count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError
from .imaging import largest_component, mask_area_pixels


@dataclass(frozen=True)
class AreaEstimate:
    area: float
    pixel_count: int
    depth: float
    focal: float
    samples: tuple = ()

    def to_dict(self) -> dict:
        d = {
            "area_m2": self.area,
            "pixel_count": self.pixel_count,
            "depth_m": self.depth,
            "focal_px": self.focal,
            "contour_area_definition": "filled pixel count of the largest 8-connected component",
        }
        if self.samples:
            d["samples"] = [s.to_dict() for s in self.samples]
        return d


@dataclass(frozen=True)
class OccupancyEstimate:
    object_pixels: int
    roof_pixels: int
    percentage: float
    unclipped_object_pixels: int = 0

    def to_dict(self) -> dict:
        return {
            "object_pixels": self.object_pixels,
            "unclipped_object_pixels": self.unclipped_object_pixels,
            "roof_pixels": self.roof_pixels,
            "percentage": self.percentage,
            "unclipped_percentage": 100.0 * self.unclipped_object_pixels / self.roof_pixels,
        }


def area_from_pixels(pixel_count: float, depth_m: float, focal_px: float) -> float:
    return pixel_count * (depth_m * depth_m) / (focal_px * focal_px)


def roof_area(mask, depth_m: float, focal_px: float, connectivity: int = 8) -> AreaEstimate:
    if not depth_m > 0 or not focal_px > 0:
        raise InputError("roof_metrics.bad_parameters", "depth and focal length must be positive")
    c = mask_area_pixels(largest_component(mask, connectivity))
    if c == 0:
        raise InputError("roof_metrics.empty_mask", "empty mask: no roof component")
    return AreaEstimate(area_from_pixels(c, depth_m, focal_px), c, float(depth_m), float(focal_px))


def average_area(samples: Sequence[AreaEstimate]) -> AreaEstimate:
    """Mean area over samples of the same roof; per-sample estimates are kept."""
    if not samples:
        raise InputError("roof_metrics.no_samples", "empty sample list")
    areas = [s.area for s in samples]
    return AreaEstimate(
        float(np.mean(areas)),
        int(round(np.mean([s.pixel_count for s in samples]))),
        float(np.mean([s.depth for s in samples])),
        float(np.mean([s.focal for s in samples])),
        tuple(samples),
    )


def occupancy_percent(object_mask, roof_mask) -> OccupancyEstimate:
    """Percentage of roof pixels covered by objects (objects clipped to the roof first)."""
    obj = np.asarray(object_mask, dtype=bool)
    roof = np.asarray(roof_mask, dtype=bool)
    if obj.shape != roof.shape:
        raise InputError("roof_metrics.dimension_mismatch",
                         f"object mask {obj.shape} and roof mask {roof.shape} differ")
    r = mask_area_pixels(roof)
    if r == 0:
        raise InputError("roof_metrics.empty_roof", "empty roof mask")
    o = mask_area_pixels(obj & roof)
    return OccupancyEstimate(o, r, 100.0 * o / r, mask_area_pixels(obj))
