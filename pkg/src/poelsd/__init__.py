"""Line segment detection from edge strength maps by pixel orientation estimation."""

from .edgemap import binarize, fallback_edges, load_edge_map, nms_thin, save_edge_map
from .growing import POE, POEV2, DetectionParams, Region, fit_region, grow_regions
from .orientation import OrientationMap, WindowBank, build_window_bank, estimate_orientation
from .pipeline import detect
from .segments import LineSegment, extract_endpoints, parse, serialize
from .validation import ValidationContext, compute_l_min, region_size, validate

__all__ = [
    "POE", "POEV2", "DetectionParams", "LineSegment", "OrientationMap", "Region",
    "ValidationContext", "WindowBank", "binarize", "build_window_bank", "compute_l_min",
    "detect", "estimate_orientation", "extract_endpoints", "fallback_edges", "fit_region",
    "grow_regions", "load_edge_map", "nms_thin", "parse", "region_size", "save_edge_map",
    "serialize", "validate",
]

__version__ = "0.1.0"
