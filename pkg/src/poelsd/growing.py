"""Guided Region Growing and the plain (fixed-line) growing mode."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .edgemap import binarize
from .errors import DegenerateFitError
from .orientation import OrientationMap
from .validation import FULL_WEIGHT_AT, ValidationContext

POEV2 = "poev2"
POE = "poe"
MODES = (POEV2, POE)

PRESETS = {
    "generic": {"lam": 0.1, "s": 5},
    "wireframe": {"lam": 0.8, "s": 3},
}

# seed bins (0, .1], (.1, .2], ..., (.9, 1]
_BIN_EDGES = np.array([k / 10 for k in range(1, 11)])


@dataclass(frozen=True)
class DetectionParams:
    lam: float = 0.1
    W: int = 7
    P: int = 16
    tau: float = math.pi / 16
    l_w: float = 3.0
    s: int = 5
    epsilon: float = 1.0
    mode: str = POEV2

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.W < 1:
            raise ValueError(f"window half-width must be >= 1, got {self.W}")
        if self.P < 2:
            raise ValueError(f"direction count must be >= 2, got {self.P}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.l_w > 0:
            raise ValueError(f"l_w must be positive, got {self.l_w}")
        if self.s < 3 or self.s % 2 == 0:
            raise ValueError(f"search size must be odd and >= 3, got {self.s}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    @classmethod
    def preset(cls, name: str, **overrides) -> "DetectionParams":
        try:
            values = dict(PRESETS[name])
        except KeyError:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
        values.update(overrides)
        return cls(**values)


@dataclass
class Region:
    pixels: list  # (x, y, p)
    seed: tuple[int, int]
    seed_angle: float
    ref_point: tuple[float, float]
    line_angle: float
    idx: int = 1
    dist_r: float = 0.0
    # (x, y, c_x, c_y, line_angle) at insertion time; filled only when tracing
    log: list = field(default_factory=list, repr=False)
    refits: list = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.pixels)

    def to_json(self) -> dict:
        return {
            "seed": list(self.seed),
            "seed_angle": self.seed_angle,
            "ref_point": list(self.ref_point),
            "line_angle": self.line_angle,
            "idx": self.idx,
            "dist_r": self.dist_r,
            "pixels": [[x, y, p] for x, y, p in self.pixels],
            "log": [list(e) for e in self.log],
            "refits": [list(e) for e in self.refits],
        }


def angle_diff(a: float, b: float) -> float:
    """Difference between two undirected orientations, in [0, pi/2]."""
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


def point_line_distance(pixel, ref, theta: float) -> float:
    (x1, y1), (x0, y0) = pixel, ref
    return abs(-(x1 - x0) * math.sin(theta) + (y1 - y0) * math.cos(theta))


def dist_r_schedule(idx: int, l_w: float = 3.0, P: int = 16) -> float:
    if idx < 1:
        raise ValueError("idx starts at 1")
    return idx * l_w / math.sin(3 * math.pi / (2 * P))


def _axis_angle(mxx: float, myy: float, mxy: float) -> float:
    """Direction of the first inertia axis (largest spread), in [0, pi)."""
    theta = 0.5 * math.atan2(2.0 * mxy, mxx - myy)
    return theta % math.pi


def scatter_moments(pixels):
    """Weighted centroid and central second moments of (x, y, w) triples."""
    arr = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    w = arr[:, 2]
    total = w.sum()
    if not total > 0:
        raise DegenerateFitError("region has zero total weight")
    cx = float((w * arr[:, 0]).sum() / total)
    cy = float((w * arr[:, 1]).sum() / total)
    dx, dy = arr[:, 0] - cx, arr[:, 1] - cy
    mxx = float((w * dx * dx).sum() / total)
    myy = float((w * dy * dy).sum() / total)
    mxy = float((w * dx * dy).sum() / total)
    return (cx, cy), (mxx, myy, mxy)


def fit_region(pixels):
    """Weighted centroid and line angle of the first inertia axis.

    ``pixels`` is a sequence of (x, y, weight). Raises DegenerateFitError when
    the weights sum to zero or the points do not spread (fewer than two
    distinct locations).
    """
    if len(pixels) < 2:
        raise DegenerateFitError("at least two pixels are needed to fit a line")
    ref, (mxx, myy, mxy) = scatter_moments(pixels)
    if mxx + myy <= 0.0:
        raise DegenerateFitError("all pixels coincide")
    return ref, _axis_angle(mxx, myy, mxy)


def seed_order(values: np.ndarray, lam: float) -> np.ndarray:
    """Flat indices of eligible seeds: descending value bins, raster order within a bin."""
    flat = values.ravel()
    candidates = np.flatnonzero((flat > lam) & (flat > 0))
    bins = np.searchsorted(_BIN_EDGES, flat[candidates], side="left")
    order = np.lexsort((candidates, -bins))
    return candidates[order]


class RegionGrower:
    """Single-image growing engine. Holds the USED labels; not shareable across threads."""

    def __init__(self, values, orient: OrientationMap, params: DetectionParams,
                 ctx: ValidationContext | None = None, trace: bool = False):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != orient.shape:
            raise ValueError(f"dimension mismatch: map {values.shape} vs orientation {orient.shape}")
        if orient.P != params.P:
            raise ValueError("orientation map and params disagree on P")
        if params.mode == POE:
            values = binarize(values, params.lam)
        self.params = params
        self.height, self.width = values.shape
        self.values = values
        if ctx is None:
            ctx = ValidationContext.from_params(self.width, self.height, params)
        self.ctx = ctx
        self.trace = trace
        P = params.P
        # quantized angles are compared by index; invalid pixels map to slot P
        valid = orient.valid & (values > 0)
        self._ang = np.where(valid, orient.angle_index, P).ravel().tolist()
        self._val = values.ravel().tolist()
        self._used = bytearray(values.size)
        tol = math.floor(params.tau * P / math.pi + 1e-9)
        self._tol = tol
        half = params.s // 2
        self._nbrs = [(dx, dy) for dy in range(-half, half + 1) for dx in range(-half, half + 1)
                      if dx or dy]
        self._step = math.pi / P
        self.rejected = 0

    def _angle_table(self, a0: int) -> list:
        P, tol = self.params.P, self._tol
        ok = [False] * (P + 1)
        for a in range(P):
            d = abs(a - a0) % P
            ok[a] = min(d, P - d) <= tol
        return ok

    def grow(self, seed: int) -> Region:
        """Grow one region from flat seed index; marks its pixels USED."""
        params = self.params
        width, height = self.width, self.height
        val, ang, used = self._val, self._ang, self._used
        guided = params.mode == POEV2
        l_w = params.l_w
        P = params.P
        trace = self.trace

        sy, sx = divmod(seed, width)
        a0 = ang[seed]
        ok = self._angle_table(a0)
        seed_angle = a0 * self._step
        cx, cy, theta = float(sx), float(sy), seed_angle
        sin_t, cos_t = math.sin(theta), math.cos(theta)
        idx = 1
        dist_r = dist_r_schedule(1, l_w, P)

        region = Region(pixels=[], seed=(sx, sy), seed_angle=seed_angle,
                        ref_point=(cx, cy), line_angle=theta, idx=1, dist_r=dist_r)
        pixels = region.pixels
        # running weighted sums relative to the seed for O(1) refits
        sw = swx = swy = swxx = swyy = swxy = 0.0

        queue = [seed]
        used[seed] = 1
        p = val[seed]
        pixels.append((sx, sy, p))
        sw += p
        if trace:
            region.log.append((sx, sy, cx, cy, theta))

        nbrs = self._nbrs
        head = 0
        while head < len(queue):
            cur = queue[head]
            head += 1
            py, px = divmod(cur, width)
            for dx, dy in nbrs:
                x = px + dx
                y = py + dy
                if x < 0 or y < 0 or x >= width or y >= height:
                    continue
                q = y * width + x
                if used[q] or not ok[ang[q]]:
                    continue
                if abs(-(x - cx) * sin_t + (y - cy) * cos_t) > l_w:
                    continue
                used[q] = 1
                queue.append(q)
                p = val[q]
                pixels.append((x, y, p))
                if trace:
                    region.log.append((x, y, cx, cy, theta))
                rx, ry = x - sx, y - sy
                sw += p
                swx += p * rx
                swy += p * ry
                swxx += p * rx * rx
                swyy += p * ry * ry
                swxy += p * rx * ry
                if guided and math.hypot(x - cx, y - cy) > dist_r:
                    mx, my = swx / sw, swy / sw
                    mxx = swxx / sw - mx * mx
                    myy = swyy / sw - my * my
                    mxy = swxy / sw - mx * my
                    cx, cy = sx + mx, sy + my
                    theta = _axis_angle(mxx, myy, mxy)
                    sin_t, cos_t = math.sin(theta), math.cos(theta)
                    idx += 1
                    dist_r = dist_r_schedule(idx, l_w, P)
                    if trace:
                        region.refits.append((len(pixels), cx, cy, theta, dist_r))

        region.ref_point = (cx, cy)
        region.line_angle = theta
        region.idx = idx
        region.dist_r = dist_r
        return region

    def release(self, region: Region) -> None:
        used = self._used
        width = self.width
        for x, y, _ in region.pixels:
            used[y * width + x] = 0

    def run(self) -> list[Region]:
        """Grow from every eligible seed; returns the regions passing size validation."""
        l_min = self.ctx.l_min
        values = self.values
        lam = self.params.lam
        accepted = []
        used = self._used
        for seed in seed_order(values, lam).tolist():
            if used[seed]:
                continue
            region = self.grow(seed)
            size = math.fsum(1.0 if p >= FULL_WEIGHT_AT else p for _, _, p in region.pixels)
            if size >= l_min:
                accepted.append(region)
            else:
                # members become available again; the seed is never retried
                self.release(region)
                self.rejected += 1
        return accepted


def grow_regions(values, orient: OrientationMap, params: DetectionParams,
                 ctx: ValidationContext | None = None, trace: bool = False) -> list[Region]:
    """Grow and validate line support regions over one edge map.

    In POE mode the map is binarized at ``params.lam`` first, so every pixel
    weighs 1; ``orient`` should then be estimated on that binary map (see
    ``pipeline.detect``).
    """
    return RegionGrower(values, orient, params, ctx=ctx, trace=trace).run()
