"""End-to-end detection: edge strength map in, line segments out."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .edgemap import binarize, check_edge_map, nms_thin
from .growing import POE, DetectionParams, RegionGrower
from .orientation import build_window_bank, estimate_orientation
from .segments import LineSegment, regions_to_segments
from .validation import ValidationContext


@lru_cache(maxsize=8)
def window_bank(W: int, P: int):
    return build_window_bank(W, P)


def detect(values, params: DetectionParams | None = None, nms: bool = False,
           return_regions: bool = False):
    """Detect line segments in an edge strength map.

    With ``nms`` the map is first thinned across the orientations estimated on
    the raw map. POE mode binarizes at ``params.lam`` before estimating
    orientations, so it sees only a binary edge map.
    """
    params = params or DetectionParams()
    values = check_edge_map(values)
    bank = window_bank(params.W, params.P)
    if nms:
        values = nms_thin(values, estimate_orientation(values, bank))
    work = binarize(values, params.lam) if params.mode == POE else values
    orient = estimate_orientation(work, bank)
    height, width = work.shape
    ctx = ValidationContext.from_params(width, height, params)
    regions = RegionGrower(work, orient, params, ctx=ctx).run()
    segments: list[LineSegment] = regions_to_segments(regions)
    if return_regions:
        return segments, regions
    return segments


def detect_array(values, **kwargs) -> np.ndarray:
    """Convenience wrapper returning an (n, 5) array of x1, y1, x2, y2, score."""
    segs = detect(values, DetectionParams(**kwargs))
    return np.array([[s.x1, s.y1, s.x2, s.y2, s.score] for s in segs]).reshape(-1, 5)
