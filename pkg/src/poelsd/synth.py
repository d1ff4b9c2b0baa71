"""Synthetic edge strength maps with exact ground-truth segments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import shapely

from .metrics import rasterize
from .segments import LineSegment, write_segments
from .validation import compute_l_min

MAX_ATTEMPTS = 2000


@dataclass(frozen=True)
class SyntheticScene:
    width: int = 512
    height: int = 512
    n_segments: tuple[int, int] = (5, 15)
    min_length: float | None = None  # default: 2 * l_min for the image size
    max_length: float | None = None  # default: half the shorter side
    noise: float = 0.0
    blur: bool = True
    seed: int = 0
    l_w: float = 3.0
    margin: int = 8
    # explicit ground truth; when given, random placement is skipped
    segments: tuple = field(default=())


def _point_segment_distance(px, py, seg: LineSegment):
    ax, ay, bx, by = seg.x1, seg.y1, seg.x2, seg.y2
    vx, vy = bx - ax, by - ay
    denom = vx * vx + vy * vy
    t = np.clip(((px - ax) * vx + (py - ay) * vy) / denom, 0.0, 1.0) if denom else 0.0
    return np.hypot(px - (ax + t * vx), py - (ay + t * vy))


def _place_segments(scene: SyntheticScene, rng: np.random.Generator) -> list[LineSegment]:
    lo, hi = scene.n_segments
    count = int(rng.integers(lo, hi + 1))
    min_len = scene.min_length
    if min_len is None:
        min_len = math.ceil(2 * compute_l_min(scene.width, scene.height))
    max_len = scene.max_length or min(scene.width, scene.height) / 2
    if max_len < min_len:
        raise ValueError("max_length is shorter than min_length")
    x_lo, y_lo = scene.margin, scene.margin
    x_hi, y_hi = scene.width - 1 - scene.margin, scene.height - 1 - scene.margin
    min_sep = 2 * scene.l_w
    placed: list[LineSegment] = []
    lines = []
    attempts = 0
    while len(placed) < count:
        attempts += 1
        if attempts > MAX_ATTEMPTS * count:
            raise ValueError(f"could not place {count} separated segments in "
                             f"{scene.width}x{scene.height}")
        length = rng.uniform(min_len, max_len)
        theta = rng.uniform(0.0, math.pi)
        dx, dy = 0.5 * length * math.cos(theta), 0.5 * length * math.sin(theta)
        cx = rng.uniform(x_lo + abs(dx), x_hi - abs(dx)) if x_hi - x_lo > 2 * abs(dx) else None
        cy = rng.uniform(y_lo + abs(dy), y_hi - abs(dy)) if y_hi - y_lo > 2 * abs(dy) else None
        if cx is None or cy is None:
            continue
        if not scene.blur:
            seg = LineSegment(round(cx - dx), round(cy - dy), round(cx + dx), round(cy + dy), 1.0)
        else:
            seg = LineSegment(cx - dx, cy - dy, cx + dx, cy + dy, 1.0)
        line = shapely.LineString([(seg.x1, seg.y1), (seg.x2, seg.y2)])
        if any(line.distance(other) <= min_sep for other in lines):
            continue
        placed.append(seg)
        lines.append(line)
    return placed


def render_antialiased(segments, width: int, height: int) -> np.ndarray:
    """Coverage of each pixel square by a 1-px-wide strip along every segment."""
    out = np.zeros((height, width), dtype=np.float64)
    for seg in segments:
        vx, vy = seg.x2 - seg.x1, seg.y2 - seg.y1
        norm = math.hypot(vx, vy)
        if norm == 0:
            continue
        nx, ny = -vy / norm * 0.5, vx / norm * 0.5
        strip = shapely.Polygon([
            (seg.x1 + nx, seg.y1 + ny), (seg.x2 + nx, seg.y2 + ny),
            (seg.x2 - nx, seg.y2 - ny), (seg.x1 - nx, seg.y1 - ny),
        ])
        x0 = max(int(math.floor(min(seg.x1, seg.x2))) - 1, 0)
        x1 = min(int(math.ceil(max(seg.x1, seg.x2))) + 1, width - 1)
        y0 = max(int(math.floor(min(seg.y1, seg.y2))) - 1, 0)
        y1 = min(int(math.ceil(max(seg.y1, seg.y2))) + 1, height - 1)
        ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
        ys, xs = ys.ravel(), xs.ravel()
        near = _point_segment_distance(xs, ys, seg) < 1.25
        ys, xs = ys[near], xs[near]
        boxes = shapely.box(xs - 0.5, ys - 0.5, xs + 0.5, ys + 0.5)
        cover = shapely.area(shapely.intersection(boxes, strip))
        # round off float dust from the polygon clipping
        cover = np.clip(np.round(cover, 12), 0.0, 1.0)
        np.maximum.at(out, (ys, xs), cover)
    return out


def generate(scene: SyntheticScene) -> tuple[np.ndarray, list[LineSegment]]:
    """Render a scene. Deterministic for a fixed ``scene.seed``."""
    rng = np.random.default_rng(scene.seed)
    if scene.segments:
        segments = [s if isinstance(s, LineSegment) else LineSegment(*s) for s in scene.segments]
    elif scene.n_segments[1] > 0:
        segments = _place_segments(scene, rng)
    else:
        segments = []

    if scene.blur:
        values = render_antialiased(segments, scene.width, scene.height)
    else:
        values = rasterize(segments, scene.width, scene.height).astype(np.float64)

    if scene.noise > 0:
        salt = rng.random((scene.height, scene.width)) < scene.noise
        levels = rng.uniform(0.1, 0.6, size=(scene.height, scene.width))
        ys, xs = np.mgrid[0 : scene.height, 0 : scene.width]
        clear = np.ones_like(salt)
        for seg in segments:
            clear &= _point_segment_distance(xs, ys, seg) > scene.l_w + 1.0
        salt &= clear & (values == 0)
        values[salt] = levels[salt]
    return values, segments


def generate_suite(count: int, seed: int = 0, **scene_kwargs) -> list[tuple[np.ndarray, list]]:
    base = SyntheticScene(**scene_kwargs)
    return [generate(replace(base, seed=seed + i)) for i in range(count)]


def write_dataset(directory, count: int, seed: int = 0, **scene_kwargs) -> list[Path]:
    """Write ``scene_XXXX.pgm`` edge maps and matching ``scene_XXXX.txt`` ground truth."""
    from .edgemap import save_edge_map

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, (values, segments) in enumerate(generate_suite(count, seed, **scene_kwargs)):
        stem = directory / f"scene_{i:04d}"
        save_edge_map(stem.with_suffix(".pgm"), values)
        write_segments(stem.with_suffix(".txt"), segments, "text")
        paths.append(stem.with_suffix(".pgm"))
    return paths
